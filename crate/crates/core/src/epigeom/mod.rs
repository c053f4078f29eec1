//! Epipolar geometry: fundamental matrices, epipolar errors, robust
//! estimation and refinement.

mod eight_point;
mod lm;
mod ransac;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::Pt2;

pub use eight_point::{eight_point, hartley_normalization, DEGENERACY_CONDITION};
pub use lm::{epipolar_residuals, lm_refine, LmReport};
pub use ransac::{ransac_fundamental, ransac_gt_selection, CalibrationResult, RansacSampler, RANSAC_PARTITIONS};

pub const SAMPLE_SIZE: usize = 8;

/// Accuracy grid of the inlier-probability tables, in pixels.
pub const REPORT_THRESHOLDS: [f64; 6] = [1.0, 0.8, 0.5, 0.4, 0.3, 0.2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpigeomError {
    #[error("no correspondences")]
    EmptyPointSet,
    #[error("{got} correspondences, at least {need} required")]
    TooFewCorrespondences { got: usize, need: usize },
    #[error("every RANSAC sample was degenerate")]
    NoModel,
    #[error("point configuration is degenerate")]
    DegenerateSample,
    #[error("probability out of range: {0}")]
    DegenerateProbability(String),
    #[error("matrix is not a valid fundamental matrix: {0}")]
    InvalidMatrix(String),
}

/// A putative point match `x <-> x'` observed at frame `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub x: Pt2,
    pub x_prime: Pt2,
    pub t: usize,
    pub weight: f64,
}

impl Correspondence {
    pub fn new(x: Pt2, x_prime: Pt2) -> Self {
        Self { x, x_prime, t: 0, weight: 1.0 }
    }
}

/// Rank-2, unit Frobenius norm, largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Projects `m` to rank 2 and normalizes it.
    pub fn new(m: Matrix3<f64>) -> Result<Self, EpigeomError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(EpigeomError::InvalidMatrix("non-finite entry".into()));
        }
        let mut svd = m.svd(true, true);
        let (idx, _) = svd.singular_values.argmin();
        svd.singular_values[idx] = 0.0;
        let r2 = svd.recompose().map_err(|e| EpigeomError::InvalidMatrix(e.into()))?;
        Self::normalized(r2)
    }

    fn normalized(m: Matrix3<f64>) -> Result<Self, EpigeomError> {
        let n = m.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(EpigeomError::InvalidMatrix("zero matrix".into()));
        }
        let mut m = m / n;
        let big = m.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if big < 0.0 {
            m = -m;
        }
        Ok(Self { m })
    }

    /// Camera-pair construction `K2^-T [t]x R K1^-1`.
    pub fn from_cameras(k1: &Matrix3<f64>, k2: &Matrix3<f64>, r: &Matrix3<f64>, t: &Vector3<f64>) -> Result<Self, EpigeomError> {
        let k1i = k1.try_inverse().ok_or_else(|| EpigeomError::InvalidMatrix("K1 singular".into()))?;
        let k2i = k2.try_inverse().ok_or_else(|| EpigeomError::InvalidMatrix("K2 singular".into()))?;
        Self::new(k2i.transpose() * t.cross_matrix() * r * k1i)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    pub fn from_row_major(v: &[f64; 9]) -> Result<Self, EpigeomError> {
        Self::new(Matrix3::from_row_slice(v))
    }

    /// Epipolar line `F x` in the right image.
    pub fn line_in_right(&self, x: &Pt2) -> Vector3<f64> {
        self.m * x.to_homogeneous()
    }

    /// Epipolar line `F^T x'` in the left image.
    pub fn line_in_left(&self, x_prime: &Pt2) -> Vector3<f64> {
        self.m.transpose() * x_prime.to_homogeneous()
    }

    /// Right null vectors: `(e, e')` with `F e = 0` and `F^T e' = 0`,
    /// as unit homogeneous vectors.
    pub fn epipoles(&self) -> (Vector3<f64>, Vector3<f64>) {
        let svd = self.m.svd(true, true);
        let (idx, _) = svd.singular_values.argmin();
        let e = svd.v_t.expect("requested").row(idx).transpose();
        let ep = svd.u.expect("requested").column(idx).into_owned();
        (e, ep)
    }

    /// `x'^T F x`.
    pub fn algebraic_error(&self, c: &Correspondence) -> f64 {
        c.x_prime.to_homogeneous().dot(&self.line_in_right(&c.x))
    }

    /// Norm of the cross product of the two normalized 9-vectors; zero when
    /// the matrices agree up to scale.
    pub fn scale_distance(&self, other: &FundamentalMatrix) -> f64 {
        let a = self.m.as_slice();
        let b = other.m.as_slice();
        let mut acc = 0.0;
        for i in 0..9 {
            for j in i + 1..9 {
                let c = a[i] * b[j] - a[j] * b[i];
                acc += c * c;
            }
        }
        acc.sqrt()
    }

    /// Smallest over largest singular value.
    pub fn rank_ratio(&self) -> f64 {
        let s = self.m.singular_values();
        s.min() / s.max()
    }
}

/// Distance from `p` to the homogeneous line `l`; infinite for the line at
/// infinity.
pub fn point_line_distance(p: &Pt2, l: &Vector3<f64>) -> f64 {
    let n = l.x.hypot(l.y);
    if n == 0.0 {
        return f64::INFINITY;
    }
    (l.x * p.x + l.y * p.y + l.z).abs() / n
}

/// `d(x', F x)^2 + d(x, F^T x')^2` for one correspondence; the summand of the
/// symmetric epipolar error and the inlier test statistic.
pub fn correspondence_error(f: &FundamentalMatrix, c: &Correspondence) -> f64 {
    let d1 = point_line_distance(&c.x_prime, &f.line_in_right(&c.x));
    let d2 = point_line_distance(&c.x, &f.line_in_left(&c.x_prime));
    d1 * d1 + d2 * d2
}

/// Symmetric epipolar error `Q(F)`: the mean of [`correspondence_error`].
pub fn symmetric_epipolar_error(f: &FundamentalMatrix, pts: &[Correspondence]) -> Result<f64, EpigeomError> {
    if pts.is_empty() {
        return Err(EpigeomError::EmptyPointSet);
    }
    Ok(pts.iter().map(|c| correspondence_error(f, c)).sum::<f64>() / pts.len() as f64)
}

/// Fraction of correspondences whose error under `f_gt` is within each
/// threshold, in the order given.
pub fn inlier_probability_report(
    corrs: &[Correspondence],
    f_gt: &FundamentalMatrix,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>, EpigeomError> {
    if thresholds.is_empty() {
        return Ok(Vec::new());
    }
    if corrs.is_empty() {
        return Err(EpigeomError::EmptyPointSet);
    }
    let errs: Vec<f64> = corrs.iter().map(|c| correspondence_error(f_gt, c)).collect();
    Ok(thresholds
        .iter()
        .map(|&thr| (thr, errs.iter().filter(|&&e| e <= thr).count() as f64 / errs.len() as f64))
        .collect())
}

/// RANSAC iterations needed to draw one all-inlier sample with the given
/// confidence: `ceil(log(1 - confidence) / log(1 - p^s))`.
pub fn expected_iterations(inlier_prob: f64, sample_size: usize, confidence: f64) -> Result<u64, EpigeomError> {
    if !(inlier_prob > 0.0 && inlier_prob < 1.0) {
        return Err(EpigeomError::DegenerateProbability(format!("inlier probability {inlier_prob}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EpigeomError::DegenerateProbability(format!("confidence {confidence}")));
    }
    if sample_size == 0 {
        return Err(EpigeomError::DegenerateProbability("sample size 0".into()));
    }
    let all_in = inlier_prob.powi(sample_size as i32);
    let n = (1.0 - confidence).ln() / (-all_in).ln_1p();
    Ok(n.ceil().max(1.0) as u64)
}
