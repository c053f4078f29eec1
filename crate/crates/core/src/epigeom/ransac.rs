//! RANSAC over 8-point samples, split into fixed partitions that run in
//! parallel.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    correspondence_error, eight_point, lm_refine, symmetric_epipolar_error, Correspondence, EpigeomError,
    FundamentalMatrix, SAMPLE_SIZE,
};
use crate::seed::derive_seed;

/// Number of independent sampling streams. Fixed so results do not depend
/// on the thread count.
pub const RANSAC_PARTITIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub f: FundamentalMatrix,
    /// Indices into the input correspondences, ascending.
    pub inliers: Vec<usize>,
    /// `Q(F)` over the inliers.
    pub q_error: f64,
    pub iterations_used: usize,
}

#[derive(Serialize, Deserialize)]
struct CalibrationJson {
    #[serde(rename = "F")]
    f: [f64; 9],
    inliers: Vec<usize>,
    q_error: f64,
    iterations_used: usize,
}

impl CalibrationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CalibrationJson {
            f: self.f.row_major(),
            inliers: self.inliers.clone(),
            q_error: self.q_error,
            iterations_used: self.iterations_used,
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, EpigeomError> {
        let j: CalibrationJson = serde_json::from_str(s).map_err(|e| EpigeomError::InvalidMatrix(e.to_string()))?;
        Ok(Self {
            f: FundamentalMatrix::from_row_major(&j.f)?,
            inliers: j.inliers,
            q_error: j.q_error,
            iterations_used: j.iterations_used,
        })
    }
}

/// Draws minimal samples of distinct indices.
pub struct RansacSampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl RansacSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), n }
    }

    pub fn next_sample(&mut self) -> [usize; SAMPLE_SIZE] {
        let mut out = [0; SAMPLE_SIZE];
        for (o, i) in out.iter_mut().zip(sample(&mut self.rng, self.n, SAMPLE_SIZE)) {
            *o = i;
        }
        out
    }
}

struct Hypothesis {
    f: FundamentalMatrix,
    count: usize,
    residual: f64,
}

impl Hypothesis {
    fn score(f: FundamentalMatrix, corrs: &[Correspondence], thr: f64) -> Self {
        let (count, residual) = corrs.iter().fold((0, 0.0), |(n, r), c| {
            let e = correspondence_error(&f, c);
            if e <= thr {
                (n + 1, r + e)
            } else {
                (n, r)
            }
        });
        Self { f, count, residual }
    }

    fn beats(&self, other: &Hypothesis) -> bool {
        self.count > other.count || (self.count == other.count && self.residual < other.residual)
    }
}

fn partition_sizes(iterations: usize) -> Vec<usize> {
    (0..RANSAC_PARTITIONS)
        .map(|p| iterations / RANSAC_PARTITIONS + usize::from(p < iterations % RANSAC_PARTITIONS))
        .collect()
}

fn inliers_of(f: &FundamentalMatrix, corrs: &[Correspondence], thr: f64) -> Vec<usize> {
    (0..corrs.len()).filter(|&i| correspondence_error(f, &corrs[i]) <= thr).collect()
}

fn sample_model(corrs: &[Correspondence], idx: &[usize; SAMPLE_SIZE]) -> Option<FundamentalMatrix> {
    let s: Vec<Correspondence> = idx.iter().map(|&i| corrs[i]).collect();
    eight_point(&s).ok()
}

/// Robust fit: best-inlier-count hypothesis over `iterations` samples,
/// refit on its inliers when that does not lose inliers. `inlier_threshold`
/// bounds [`correspondence_error`]. Deterministic for a given seed.
pub fn ransac_fundamental(
    corrs: &[Correspondence],
    iterations: usize,
    inlier_threshold: f64,
    rng_seed: u64,
) -> Result<CalibrationResult, EpigeomError> {
    if corrs.len() < SAMPLE_SIZE {
        return Err(EpigeomError::TooFewCorrespondences { got: corrs.len(), need: SAMPLE_SIZE });
    }
    let best = partition_sizes(iterations)
        .into_par_iter()
        .enumerate()
        .map(|(p, budget)| {
            let mut sampler = RansacSampler::new(corrs.len(), derive_seed(rng_seed, &format!("ransac/{p}")));
            let mut best: Option<Hypothesis> = None;
            for _ in 0..budget {
                let idx = sampler.next_sample();
                let Some(f) = sample_model(corrs, &idx) else { continue };
                let h = Hypothesis::score(f, corrs, inlier_threshold);
                if best.as_ref().is_none_or(|b| h.beats(b)) {
                    best = Some(h);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<Hypothesis>, |acc, h| match acc {
            Some(a) if !h.beats(&a) => Some(a),
            _ => Some(h),
        })
        .ok_or(EpigeomError::NoModel)?;

    let mut f = best.f;
    let mut inliers = inliers_of(&f, corrs, inlier_threshold);
    if inliers.len() >= SAMPLE_SIZE {
        let subset: Vec<Correspondence> = inliers.iter().map(|&i| corrs[i]).collect();
        if let Ok(refit) = eight_point(&subset) {
            let refit_inliers = inliers_of(&refit, corrs, inlier_threshold);
            if refit_inliers.len() >= inliers.len() {
                f = refit;
                inliers = refit_inliers;
            }
        }
    }
    let q_error = if inliers.is_empty() {
        0.0
    } else {
        let subset: Vec<Correspondence> = inliers.iter().map(|&i| corrs[i]).collect();
        symmetric_epipolar_error(&f, &subset)?
    };
    Ok(CalibrationResult { f, inliers, q_error, iterations_used: iterations })
}

/// Evaluation-only variant that uses ground truth for model selection:
/// every block of `block` hypotheses, the one with the lowest `Q` on
/// `ground_truth` is refined by LM on its inliers, and the best refined
/// model over all blocks is returned.
pub fn ransac_gt_selection(
    corrs: &[Correspondence],
    ground_truth: &[Correspondence],
    iterations: usize,
    block: usize,
    inlier_threshold: f64,
    rng_seed: u64,
) -> Result<CalibrationResult, EpigeomError> {
    if corrs.len() < SAMPLE_SIZE {
        return Err(EpigeomError::TooFewCorrespondences { got: corrs.len(), need: SAMPLE_SIZE });
    }
    if ground_truth.is_empty() {
        return Err(EpigeomError::EmptyPointSet);
    }
    let block = block.max(1);
    let mut sampler = RansacSampler::new(corrs.len(), derive_seed(rng_seed, "ransac-gt"));
    let mut best: Option<(f64, CalibrationResult)> = None;
    let mut used = 0;
    while used < iterations {
        let n = block.min(iterations - used);
        let mut pick: Option<(f64, FundamentalMatrix)> = None;
        for _ in 0..n {
            let Some(f) = sample_model(corrs, &sampler.next_sample()) else { continue };
            let q = symmetric_epipolar_error(&f, ground_truth)?;
            if pick.as_ref().is_none_or(|p| q < p.0) {
                pick = Some((q, f));
            }
        }
        used += n;
        let Some((_, f)) = pick else { continue };
        let inliers = inliers_of(&f, corrs, inlier_threshold);
        let subset: Vec<Correspondence> = inliers.iter().map(|&i| corrs[i]).collect();
        let refined = if subset.len() >= SAMPLE_SIZE { lm_refine(&f, &subset, 50)?.f } else { f };
        let q_gt = symmetric_epipolar_error(&refined, ground_truth)?;
        if best.as_ref().is_none_or(|b| q_gt < b.0) {
            let inliers = inliers_of(&refined, corrs, inlier_threshold);
            let q_error = if inliers.is_empty() {
                0.0
            } else {
                let s: Vec<Correspondence> = inliers.iter().map(|&i| corrs[i]).collect();
                symmetric_epipolar_error(&refined, &s)?
            };
            best = Some((q_gt, CalibrationResult { f: refined, inliers, q_error, iterations_used: 0 }));
        }
    }
    let (_, mut res) = best.ok_or(EpigeomError::NoModel)?;
    res.iterations_used = used;
    Ok(res)
}
