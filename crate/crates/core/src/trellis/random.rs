//! Random trellis generator for solver testing and benchmarks.

use rand::Rng;

use super::{TrellisGraph, TrellisVertex};
use crate::barcode::{TransitionPrior, VertexPrior};
use crate::geometry::Pt2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTrellisSpec {
    pub min_frames: usize,
    pub max_frames: usize,
    pub min_width: usize,
    pub max_width: usize,
    /// Positions are uniform in `[0, extent]^2` in both images. The default
    /// puts a same-layer pair closer than the separation in about a fifth of
    /// the default-sized instances.
    pub extent: f64,
    pub separation: f64,
    /// Probabilities are uniform in `[p_min, 1 - p_min]`.
    pub p_min: f64,
    /// Chance that an inter-layer edge exists.
    pub edge_density: f64,
}

impl Default for RandomTrellisSpec {
    fn default() -> Self {
        Self {
            min_frames: 2,
            max_frames: 8,
            min_width: 2,
            max_width: 5,
            extent: 400.0,
            separation: 15.0,
            p_min: 0.05,
            edge_density: 1.0,
        }
    }
}

/// Draws one trellis; layer widths and the frame count are uniform in
/// their ranges.
pub fn random_trellis<R: Rng>(spec: &RandomTrellisSpec, rng: &mut R) -> TrellisGraph {
    let frames = rng.random_range(spec.min_frames..=spec.max_frames);
    let widths: Vec<usize> = (0..frames)
        .map(|_| rng.random_range(spec.min_width..=spec.max_width))
        .collect();
    let prob = |rng: &mut R| rng.random_range(spec.p_min..=1.0 - spec.p_min);
    let layers: Vec<Vec<TrellisVertex>> = widths
        .iter()
        .enumerate()
        .map(|(t, &w)| {
            (0..w)
                .map(|k| {
                    let mut pt = || Pt2::new(rng.random_range(0.0..spec.extent), rng.random_range(0.0..spec.extent));
                    let pair = (pt(), pt());
                    TrellisVertex {
                        t,
                        left: k,
                        right: k,
                        position_pair: pair,
                        prior: VertexPrior::new(prob(rng)),
                    }
                })
                .collect()
        })
        .collect();
    let transitions = (1..frames)
        .map(|t| {
            (0..widths[t - 1] * widths[t])
                .map(|_| {
                    let keep = spec.edge_density >= 1.0 || rng.random_bool(spec.edge_density);
                    let p = prob(rng);
                    keep.then(|| TransitionPrior::new(p))
                })
                .collect()
        })
        .collect();
    TrellisGraph::from_parts(layers, transitions, spec.separation).expect("generated shapes agree")
}
