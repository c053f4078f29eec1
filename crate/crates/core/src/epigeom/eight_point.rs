//! Normalized 8-point estimator.

use nalgebra::{DMatrix, Matrix3};

use super::{Correspondence, EpigeomError, FundamentalMatrix, SAMPLE_SIZE};
use crate::geometry::Pt2;

/// Samples whose normalized design matrix has `sigma_1 / sigma_8` above this
/// are rejected.
pub const DEGENERACY_CONDITION: f64 = 1e8;

/// Similarity moving the centroid to the origin with mean distance `sqrt 2`.
/// Returns `(T, s)` where `s` is the isotropic scale.
pub fn hartley_normalization<'a>(pts: impl Iterator<Item = &'a Pt2> + Clone) -> (Matrix3<f64>, f64) {
    let n = pts.clone().count().max(1) as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean = pts.map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    (Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0), s)
}

/// Linear least-squares fit of `F` to at least eight correspondences, with
/// Hartley normalization and rank-2 enforcement in normalized coordinates.
pub fn eight_point(corrs: &[Correspondence]) -> Result<FundamentalMatrix, EpigeomError> {
    if corrs.len() < SAMPLE_SIZE {
        return Err(EpigeomError::TooFewCorrespondences { got: corrs.len(), need: SAMPLE_SIZE });
    }
    let (t1, _) = hartley_normalization(corrs.iter().map(|c| &c.x));
    let (t2, _) = hartley_normalization(corrs.iter().map(|c| &c.x_prime));
    let rows = corrs.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (r, c) in corrs.iter().enumerate() {
        let x = t1 * c.x.to_homogeneous();
        let xp = t2 * c.x_prime.to_homogeneous();
        for i in 0..3 {
            for j in 0..3 {
                a[(r, 3 * i + j)] = xp[i] * x[j];
            }
        }
    }
    let svd = a.svd(false, true);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = &svd.singular_values;
    if !(s[order[0]] / s[order[7]] <= DEGENERACY_CONDITION) {
        return Err(EpigeomError::DegenerateSample);
    }
    let v_t = svd.v_t.expect("requested");
    let f = v_t.row(order[8]);
    let fhat = Matrix3::from_row_slice(&[f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]]);
    let fhat = *FundamentalMatrix::new(fhat)?.matrix();
    FundamentalMatrix::new(t2.transpose() * fhat * t1)
}
