//! Trellis flow model for matching frontier points across two views.
//!
//! Layer `t` holds one vertex per candidate pair `(x, x')` of left/right
//! critical points at frame `t`. Edges join consecutive layers; a source
//! feeds layer 0 and the last layer drains into a target. Two
//! vertex-disjoint, spatially separated source-to-target paths maximizing
//! the total log-odds of their vertex and transition priors are the two
//! frontier-point tracks.
//!
//! Edge weights are `-logit(p_to) - logit(p_transition)`; source edges
//! carry only the vertex term and target edges weigh 0, so a path's weight
//! is the negated log-odds it collects.

mod constraints;
mod exact;
pub mod random;
mod solve;
mod text;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barcode::{transition_prior, TransitionPrior, VertexPrior};
use crate::epigeom::Correspondence;
use crate::geometry::Pt2;
use crate::hull::CriticalPoint;

pub use constraints::{check_flow_constraints, check_flows, ConstraintFamily, ConstraintReport, FlowAssignment, FlowNode, Violation};
pub use exact::{solve_two_paths_exact, DEFAULT_EXACT_BUDGET};
pub use solve::{objective_value, shortest_path, solve_two_paths, traversed_weight, VertexMask};

/// Default same-layer separation between the two tracks, in pixels.
pub const DEFAULT_SEPARATION: f64 = 15.0;
pub const DEFAULT_LAYER_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrellisError {
    #[error("a trellis needs at least {min} frames, got {got}")]
    TooFewFrames { got: usize, min: usize },
    #[error("layer {layer} cannot host two separated paths")]
    InsufficientCandidates { layer: usize },
    #[error("left/right inputs disagree: {0}")]
    ShapeMismatch(String),
    #[error("no source-to-target path avoids the forbidden vertices")]
    NoPath,
    #[error("blocking the first path disconnects the trellis")]
    NoSecondPath,
    #[error("exact solver needs {required} pair transitions, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("no feasible pair of separated paths exists")]
    Infeasible,
    #[error("solution violates the flow constraints: {0}")]
    InfeasibleSolution(String),
    #[error("malformed trellis text at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// One candidate correspondence `(x, x')` at frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisVertex {
    pub t: usize,
    /// Critical-point index in the left image at `t`.
    pub left: usize,
    /// Critical-point index in the right image at `t`.
    pub right: usize,
    pub position_pair: (Pt2, Pt2),
    pub prior: VertexPrior,
}

impl TrellisVertex {
    /// Same-layer distance used by the exclusion sets: the smaller of the
    /// left-image and right-image point distances.
    pub fn pair_distance(&self, other: &TrellisVertex) -> f64 {
        let dl = (self.position_pair.0 - other.position_pair.0).norm();
        let dr = (self.position_pair.1 - other.position_pair.1).norm();
        dl.min(dr)
    }
}

/// Edges from layer `t` to layer `t + 1`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stage {
    pub(crate) cols: usize,
    pub(crate) transition: Vec<Option<TransitionPrior>>,
    /// `-logit(p_transition)`; `f64::INFINITY` where there is no edge.
    pub(crate) cost: Vec<f64>,
}

impl Stage {
    fn new(rows: usize, cols: usize, transition: Vec<Option<TransitionPrior>>) -> Self {
        debug_assert_eq!(transition.len(), rows * cols);
        let cost = transition
            .iter()
            .map(|p| p.map_or(f64::INFINITY, |p| -p.log_odds()))
            .collect();
        Self { cols, transition, cost }
    }
}

/// Layered DAG over candidate pairs, with per-vertex exclusion sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisGraph {
    layers: Vec<Vec<TrellisVertex>>,
    /// `-logit(prior)` per vertex.
    vertex_cost: Vec<Vec<f64>>,
    stages: Vec<Stage>,
    /// `exclusion[t][k]`: sorted same-layer ids `m` with `pair_distance < C`.
    exclusion: Vec<Vec<Vec<usize>>>,
    separation: f64,
}

impl TrellisGraph {
    /// Assembles a graph from explicit layers and dense per-stage transition
    /// tables (`None` = no edge). Only shapes are validated; separation
    /// feasibility is left to the solvers.
    pub fn from_parts(
        layers: Vec<Vec<TrellisVertex>>,
        transitions: Vec<Vec<Option<TransitionPrior>>>,
        separation: f64,
    ) -> Result<Self, TrellisError> {
        if layers.is_empty() {
            return Err(TrellisError::TooFewFrames { got: 0, min: 1 });
        }
        if transitions.len() != layers.len() - 1 {
            return Err(TrellisError::ShapeMismatch(format!(
                "{} layers need {} transition tables, got {}",
                layers.len(),
                layers.len() - 1,
                transitions.len()
            )));
        }
        for (t, layer) in layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(TrellisError::InsufficientCandidates { layer: t });
            }
        }
        let stages = transitions
            .into_iter()
            .enumerate()
            .map(|(t, tr)| {
                let (rows, cols) = (layers[t].len(), layers[t + 1].len());
                if tr.len() != rows * cols {
                    return Err(TrellisError::ShapeMismatch(format!(
                        "stage {t} has {} entries, expected {rows}x{cols}",
                        tr.len()
                    )));
                }
                Ok(Stage::new(rows, cols, tr))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vertex_cost = layers
            .iter()
            .map(|l| l.iter().map(|v| -v.prior.log_odds()).collect())
            .collect();
        let exclusion = layers.iter().map(|l| exclusion_sets(l, separation)).collect();
        Ok(Self {
            layers,
            vertex_cost,
            stages,
            exclusion,
            separation,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<TrellisVertex>] {
        &self.layers
    }

    pub fn layer(&self, t: usize) -> &[TrellisVertex] {
        &self.layers[t]
    }

    pub fn vertex(&self, t: usize, k: usize) -> &TrellisVertex {
        &self.layers[t][k]
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// `D(k)` at layer `t`.
    pub fn exclusion(&self, t: usize, k: usize) -> &[usize] {
        &self.exclusion[t][k]
    }

    pub fn excludes(&self, t: usize, a: usize, b: usize) -> bool {
        self.exclusion[t][a].binary_search(&b).is_ok()
    }

    /// Successors `N(i)` of vertex `i` at layer `t` (empty for the last layer).
    pub fn successors(&self, t: usize, i: usize) -> impl Iterator<Item = usize> + '_ {
        let stage = self.stages.get(t);
        let cols = stage.map_or(0, |s| s.cols);
        (0..cols).filter(move |&j| stage.is_some_and(|s| s.transition[i * s.cols + j].is_some()))
    }

    /// Predecessors of vertex `j` at layer `t` (empty for layer 0).
    pub fn predecessors(&self, t: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        let rows = if t == 0 { 0 } else { self.layers[t - 1].len() };
        (0..rows).filter(move |&i| self.stages[t - 1].transition[i * self.stages[t - 1].cols + j].is_some())
    }

    pub fn transition(&self, t: usize, i: usize, j: usize) -> Option<TransitionPrior> {
        let s = &self.stages[t];
        s.transition[i * s.cols + j]
    }

    /// Weight of the edge from `(t, i)` to `(t + 1, j)`, if it exists.
    pub fn edge_weight(&self, t: usize, i: usize, j: usize) -> Option<f64> {
        let s = &self.stages[t];
        let c = s.cost[i * s.cols + j];
        c.is_finite().then(|| self.vertex_cost[t + 1][j] + c)
    }

    /// Weight of the source edge into `(0, k)`: the vertex term only.
    pub fn source_weight(&self, k: usize) -> f64 {
        self.vertex_cost[0][k]
    }

    /// Inter-layer edge count (source and target edges excluded).
    pub fn inner_edge_count(&self) -> usize {
        self.stages.iter().map(|s| s.transition.iter().filter(|p| p.is_some()).count()).sum()
    }

    pub fn source_edge_count(&self) -> usize {
        self.layers[0].len()
    }

    pub fn target_edge_count(&self) -> usize {
        self.layers[self.layers.len() - 1].len()
    }

    pub fn max_layer_width(&self) -> usize {
        self.layers.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// True when the two vertices of layer `t` are closer than `2C`.
    pub(crate) fn near_twice_separation(&self, t: usize, a: usize, b: usize) -> bool {
        self.layers[t][a].pair_distance(&self.layers[t][b]) < 2.0 * self.separation
    }
}

fn exclusion_sets(layer: &[TrellisVertex], separation: f64) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); layer.len()];
    for i in 0..layer.len() {
        for j in i + 1..layer.len() {
            if layer[i].pair_distance(&layer[j]) < separation {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

/// Vertex priors of every left/right critical-point pair of one frame,
/// row-major over `(left, right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPriors {
    pub left_count: usize,
    pub right_count: usize,
    pub priors: Vec<VertexPrior>,
    /// Optional tie-break weight per pair, same layout as `priors`: among
    /// equal priors the layer cap keeps higher support first. Empty means
    /// no preference.
    pub support: Vec<u32>,
}

impl PairPriors {
    /// Table without support weights.
    pub fn new(left_count: usize, right_count: usize, priors: Vec<VertexPrior>) -> Self {
        Self { left_count, right_count, priors, support: Vec::new() }
    }

    pub fn get(&self, i: usize, j: usize) -> VertexPrior {
        self.priors[i * self.right_count + j]
    }

    pub fn support(&self, i: usize, j: usize) -> u32 {
        self.support.get(i * self.right_count + j).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrellisConfig {
    /// Separation `C` in pixels.
    pub separation: f64,
    /// Transition kernel width in pixels.
    pub sigma: f64,
    /// Maximum vertices kept per layer (highest priors win).
    pub layer_cap: usize,
    /// Pairs with a prior below this are dropped before capping.
    pub prior_floor: f64,
}

impl Default for TrellisConfig {
    fn default() -> Self {
        Self {
            separation: DEFAULT_SEPARATION,
            sigma: 1.0,
            layer_cap: DEFAULT_LAYER_CAP,
            prior_floor: 0.0,
        }
    }
}

/// Builds the complete trellis over `T >= 2` frames.
pub fn build_trellis(
    frames_left: &[Vec<CriticalPoint>],
    frames_right: &[Vec<CriticalPoint>],
    priors: &[PairPriors],
    config: &TrellisConfig,
) -> Result<TrellisGraph, TrellisError> {
    let frames = frames_left.len();
    if frames_right.len() != frames || priors.len() != frames {
        return Err(TrellisError::ShapeMismatch(format!(
            "{} left frames, {} right frames, {} prior tables",
            frames,
            frames_right.len(),
            priors.len()
        )));
    }
    if frames < 2 {
        return Err(TrellisError::TooFewFrames { got: frames, min: 2 });
    }
    let layers = (0..frames)
        .into_par_iter()
        .map(|t| build_layer(t, &frames_left[t], &frames_right[t], &priors[t], config))
        .collect::<Result<Vec<_>, _>>()?;
    let transitions = (0..frames - 1)
        .into_par_iter()
        .map(|t| {
            let (a, b) = (&layers[t], &layers[t + 1]);
            let mut tr = Vec::with_capacity(a.len() * b.len());
            for u in a {
                for v in b {
                    tr.push(Some(transition_prior(u.position_pair, v.position_pair, config.sigma)));
                }
            }
            tr
        })
        .collect();
    let g = TrellisGraph::from_parts(layers, transitions, config.separation)?;
    for t in 0..frames {
        let n = g.layer(t).len();
        let separated = (0..n).any(|i| g.exclusion(t, i).len() + 1 < n);
        if n < 2 || !separated {
            return Err(TrellisError::InsufficientCandidates { layer: t });
        }
    }
    Ok(g)
}

fn build_layer(
    t: usize,
    left: &[CriticalPoint],
    right: &[CriticalPoint],
    priors: &PairPriors,
    config: &TrellisConfig,
) -> Result<Vec<TrellisVertex>, TrellisError> {
    if priors.left_count != left.len() || priors.right_count != right.len() {
        return Err(TrellisError::ShapeMismatch(format!(
            "frame {t}: prior table is {}x{}, critical points {}x{}",
            priors.left_count,
            priors.right_count,
            left.len(),
            right.len()
        )));
    }
    let mut cands: Vec<(usize, usize, VertexPrior)> = (0..left.len())
        .flat_map(|i| (0..right.len()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, priors.get(i, j)))
        .filter(|c| c.2.value() >= config.prior_floor)
        .collect();
    if cands.len() > config.layer_cap {
        // stable: equal priors and support keep (left, right) order
        cands.sort_by(|a, b| {
            b.2.value()
                .total_cmp(&a.2.value())
                .then_with(|| priors.support(b.0, b.1).cmp(&priors.support(a.0, a.1)))
        });
        cands.truncate(config.layer_cap);
        cands.sort_by_key(|c| (c.0, c.1));
    }
    Ok(cands
        .into_iter()
        .map(|(i, j, prior)| TrellisVertex {
            t,
            left: i,
            right: j,
            position_pair: (left[i].position, right[j].position),
            prior,
        })
        .collect())
}

/// Two source-to-target paths, one vertex id per layer each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPathSolution {
    pub paths: [Vec<usize>; 2],
    /// Total log-odds collected by both paths.
    pub objective: f64,
    /// Produced by the exact pair-state solver.
    pub exact: bool,
    /// Some layer has the two chosen vertices closer than `2C`.
    pub degenerate_risk: bool,
}

impl TwoPathSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// Point correspondences along both paths, frame-major. Vertices whose
/// similarity (recovered from the prior) is below `sim_threshold` are dropped.
pub fn extract_correspondences(sol: &TwoPathSolution, g: &TrellisGraph, sim_threshold: f64) -> Vec<Correspondence> {
    let mut out = Vec::with_capacity(2 * g.frame_count());
    for t in 0..g.frame_count() {
        for path in &sol.paths {
            let Some(&k) = path.get(t) else { continue };
            let v = g.vertex(t, k);
            let s = v.prior.similarity();
            if s >= sim_threshold {
                out.push(Correspondence {
                    x: v.position_pair.0,
                    x_prime: v.position_pair.1,
                    t,
                    weight: s,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::TangentSet;

    fn cp(x: f64, y: f64) -> CriticalPoint {
        CriticalPoint {
            position: Pt2::new(x, y),
            frame: 0,
            tangents: TangentSet::default(),
            hull_vertex: None,
        }
    }

    fn uniform_priors(k1: usize, k2: usize, p: f64) -> PairPriors {
        PairPriors::new(k1, k2, vec![VertexPrior::new(p); k1 * k2])
    }

    #[test]
    fn complete_bipartite_counts() {
        let f = vec![vec![cp(0.0, 0.0), cp(100.0, 0.0)]; 2];
        let pr = vec![uniform_priors(2, 2, 0.7); 2];
        let g = build_trellis(&f, &f, &pr, &TrellisConfig::default()).unwrap();
        assert_eq!(g.layer(0).len(), 4);
        assert_eq!(g.inner_edge_count(), 16);
        assert_eq!(g.source_edge_count(), 4);
        assert_eq!(g.target_edge_count(), 4);
        assert_eq!(g.successors(0, 1).count(), 4);
        assert_eq!(g.predecessors(1, 3).count(), 4);
        assert_eq!(g.successors(1, 0).count(), 0);
    }

    #[test]
    fn exclusion_uses_min_of_image_distances() {
        let mk = |l: f64, r: f64| TrellisVertex {
            t: 0,
            left: 0,
            right: 0,
            position_pair: (Pt2::new(l, 0.0), Pt2::new(r, 0.0)),
            prior: VertexPrior::new(0.5),
        };
        let layer = vec![mk(0.0, 0.0), mk(10.0, 40.0), mk(100.0, 100.0)];
        let g = TrellisGraph::from_parts(vec![layer], vec![], 15.0).unwrap();
        // min(10, 40) = 10 < 15
        assert!(g.excludes(0, 0, 1) && g.excludes(0, 1, 0));
        assert!(!g.excludes(0, 0, 2));
        assert_eq!(g.exclusion(0, 2), &[] as &[usize]);
    }

    #[test]
    fn half_probabilities_give_zero_weights() {
        let f = vec![vec![cp(0.0, 0.0), cp(100.0, 0.0)]; 3];
        let pr = vec![uniform_priors(2, 2, 0.5); 3];
        let mut g = build_trellis(&f, &f, &pr, &TrellisConfig::default()).unwrap();
        let half = TransitionPrior::new(0.5);
        let tr = (0..2).map(|_| vec![Some(half); 16]).collect();
        g = TrellisGraph::from_parts(g.layers().to_vec(), tr, g.separation()).unwrap();
        for t in 0..2 {
            for i in 0..4 {
                assert_eq!(g.source_weight(i), 0.0);
                for j in 0..4 {
                    assert_eq!(g.edge_weight(t, i, j), Some(0.0));
                }
            }
        }
    }

    #[test]
    fn edge_weight_formula() {
        let f = vec![vec![cp(0.0, 0.0), cp(50.0, 0.0)]; 2];
        let mut pr = vec![uniform_priors(2, 2, 0.9); 2];
        pr[1].priors[3] = VertexPrior::new(0.8);
        let g = build_trellis(&f, &f, &pr, &TrellisConfig { sigma: 2.0, ..Default::default() }).unwrap();
        let ptr = g.transition(0, 0, 3).unwrap().value();
        let want = -(0.8f64 / 0.2).ln() - (ptr / (1.0 - ptr)).ln();
        assert!((g.edge_weight(0, 0, 3).unwrap() - want).abs() < 1e-12);
        assert!((g.source_weight(0) + 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn layer_cap_keeps_top_priors() {
        let f = vec![vec![cp(0.0, 0.0), cp(40.0, 0.0), cp(80.0, 0.0)]; 2];
        let mut pr = uniform_priors(3, 3, 0.2);
        pr.priors[4] = VertexPrior::new(0.9);
        pr.priors[8] = VertexPrior::new(0.8);
        pr.priors[0] = VertexPrior::new(0.7);
        let cfg = TrellisConfig { layer_cap: 3, ..Default::default() };
        let g = build_trellis(&f, &f, &[pr.clone(), pr], &cfg).unwrap();
        let ids: Vec<_> = g.layer(0).iter().map(|v| (v.left, v.right)).collect();
        assert_eq!(ids, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn layer_cap_ties_prefer_support() {
        let f = vec![vec![cp(0.0, 0.0), cp(40.0, 0.0), cp(80.0, 0.0)]; 2];
        let mut pr = uniform_priors(3, 3, 0.9);
        pr.support = vec![0; 9];
        pr.support[5] = 7;
        pr.support[6] = 3;
        let cfg = TrellisConfig { layer_cap: 3, ..Default::default() };
        let g = build_trellis(&f, &f, &[pr.clone(), pr], &cfg).unwrap();
        let ids: Vec<_> = g.layer(0).iter().map(|v| (v.left, v.right)).collect();
        // (1, 2) and (2, 0) first, then the earliest remaining tie
        assert_eq!(ids, vec![(0, 0), (1, 2), (2, 0)]);
    }

    #[test]
    fn build_rejects_unseparable_layers() {
        let near = vec![vec![cp(0.0, 0.0), cp(5.0, 0.0)]; 2];
        let pr = vec![uniform_priors(2, 2, 0.6); 2];
        assert_eq!(
            build_trellis(&near, &near, &pr, &TrellisConfig::default()),
            Err(TrellisError::InsufficientCandidates { layer: 0 })
        );
        let one = vec![vec![cp(0.0, 0.0)]; 3];
        let pr1 = vec![uniform_priors(1, 1, 0.6); 3];
        assert!(matches!(
            build_trellis(&one, &one, &pr1, &TrellisConfig::default()),
            Err(TrellisError::InsufficientCandidates { .. })
        ));
        assert!(matches!(
            build_trellis(&one[..1], &one[..1], &pr1[..1], &TrellisConfig::default()),
            Err(TrellisError::TooFewFrames { got: 1, .. })
        ));
    }

    fn two_track_graph(frames: usize, sims: &[f64]) -> TrellisGraph {
        let mk = |t: usize, k: usize, s: f64| TrellisVertex {
            t,
            left: k,
            right: k,
            position_pair: (Pt2::new(100.0 * k as f64, 0.0), Pt2::new(100.0 * k as f64, 0.0)),
            prior: VertexPrior::from_similarity(s),
        };
        let layers: Vec<_> = (0..frames)
            .map(|t| vec![mk(t, 0, sims[2 * t]), mk(t, 1, sims[2 * t + 1])])
            .collect();
        let tr = (0..frames - 1).map(|_| vec![Some(TransitionPrior::new(0.5)); 4]).collect();
        TrellisGraph::from_parts(layers, tr, 15.0).unwrap()
    }

    #[test]
    fn correspondence_filter() {
        let g = two_track_graph(3, &[1.0; 6]);
        let sol = TwoPathSolution {
            paths: [vec![0, 0, 0], vec![1, 1, 1]],
            objective: 0.0,
            exact: false,
            degenerate_risk: false,
        };
        assert_eq!(extract_correspondences(&sol, &g, 0.95).len(), 6);
        let g = two_track_graph(3, &[1.0, 1.0, 0.9, 1.0, 1.0, 1.0]);
        let c = extract_correspondences(&sol, &g, 0.95);
        assert_eq!(c.len(), 5);
        assert!(c.iter().all(|c| c.weight >= 0.95));
        let g = two_track_graph(3, &[-1.0; 6]);
        assert_eq!(extract_correspondences(&sol, &g, -1.0).len(), 6);
    }

    #[test]
    fn solution_json_shape() {
        let sol = TwoPathSolution {
            paths: [vec![0, 1], vec![2, 3]],
            objective: 1.5,
            exact: true,
            degenerate_risk: false,
        };
        let v: serde_json::Value = serde_json::from_str(&sol.to_json()).unwrap();
        assert_eq!(v["paths"], serde_json::json!([[0, 1], [2, 3]]));
        assert_eq!(v["objective"], 1.5);
        assert_eq!(v["exact"], true);
        assert_eq!(v["degenerate_risk"], false);
    }
}
