//! Levenberg-Marquardt refinement of `F` under the symmetric epipolar error.
//!
//! The nine entries are optimized directly. After each step the matrix is
//! projected back to rank 2 and unit norm. Work happens in
//! Hartley-normalized coordinates; residuals are rescaled to pixels, so the
//! cost is exactly `Q(F)`.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector};

use super::{hartley_normalization, symmetric_epipolar_error, Correspondence, EpigeomError, FundamentalMatrix, SAMPLE_SIZE};
use crate::geometry::Pt2;

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub f: FundamentalMatrix,
    /// `Q(F)` at the start and after every accepted step.
    pub history: Vec<f64>,
    /// A stopping criterion was met before the iteration cap.
    pub converged: bool,
}

/// Residuals `r1 = x'^T F x / |(F x)_12|`, `r2 = x'^T F x / |(F^T x')_12|`
/// (interleaved per point) and their Jacobian with respect to the row-major
/// entries of `f`.
pub fn epipolar_residuals(f: &Matrix3<f64>, pts: &[(Pt2, Pt2)]) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = DVector::zeros(2 * pts.len());
    let mut jac = DMatrix::zeros(2 * pts.len(), 9);
    for (k, (x, xp)) in pts.iter().enumerate() {
        let xh = x.to_homogeneous();
        let xph = xp.to_homogeneous();
        let l = f * xh;
        let m = f.transpose() * xph;
        let e = xph.dot(&l);
        let n1 = l.x.hypot(l.y);
        let n2 = m.x.hypot(m.y);
        r[2 * k] = e / n1;
        r[2 * k + 1] = e / n2;
        let (n1c, n2c) = (n1 * n1 * n1, n2 * n2 * n2);
        for a in 0..3 {
            for b in 0..3 {
                let de = xph[a] * xh[b];
                let dn1 = match a {
                    0 => l.x * xh[b],
                    1 => l.y * xh[b],
                    _ => 0.0,
                };
                let dn2 = match b {
                    0 => m.x * xph[a],
                    1 => m.y * xph[a],
                    _ => 0.0,
                };
                jac[(2 * k, 3 * a + b)] = de / n1 - e * dn1 / n1c;
                jac[(2 * k + 1, 3 * a + b)] = de / n2 - e * dn2 / n2c;
            }
        }
    }
    (r, jac)
}

fn to_vec(m: &Matrix3<f64>) -> SVector<f64, 9> {
    SVector::<f64, 9>::from_row_slice(&[m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]])
}

fn to_mat(v: &SVector<f64, 9>) -> Matrix3<f64> {
    Matrix3::from_row_slice(v.as_slice())
}

struct Problem {
    pts: Vec<(Pt2, Pt2)>,
    /// Pixel rescaling of `r1` and `r2`.
    scale: (f64, f64),
}

impl Problem {
    fn eval(&self, f: &Matrix3<f64>, want_jac: bool) -> (f64, SVector<f64, 9>, SMatrix<f64, 9, 9>) {
        let (mut r, mut j) = epipolar_residuals(f, &self.pts);
        for k in 0..self.pts.len() {
            r[2 * k] *= self.scale.0;
            r[2 * k + 1] *= self.scale.1;
            if want_jac {
                j.row_mut(2 * k).scale_mut(self.scale.0);
                j.row_mut(2 * k + 1).scale_mut(self.scale.1);
            }
        }
        let cost = r.norm_squared() / self.pts.len() as f64;
        if !want_jac {
            return (cost, SVector::zeros(), SMatrix::zeros());
        }
        let g: SVector<f64, 9> = SVector::from_iterator((j.transpose() * &r).iter().copied());
        let h: SMatrix<f64, 9, 9> = SMatrix::from_iterator((j.transpose() * &j).iter().copied());
        (cost, g, h)
    }
}

fn project(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    FundamentalMatrix::new(*m).ok().map(|f| *f.matrix())
}

/// Locally minimizes `Q(F)` over `inliers` starting from `f0`. Only steps
/// that lower `Q` are accepted, so the result never scores worse than `f0`.
pub fn lm_refine(f0: &FundamentalMatrix, inliers: &[Correspondence], max_iter: usize) -> Result<LmReport, EpigeomError> {
    if inliers.len() < SAMPLE_SIZE {
        return Err(EpigeomError::TooFewCorrespondences { got: inliers.len(), need: SAMPLE_SIZE });
    }
    let (t1, s1) = hartley_normalization(inliers.iter().map(|c| &c.x));
    let (t2, s2) = hartley_normalization(inliers.iter().map(|c| &c.x_prime));
    let norm = |t: &Matrix3<f64>, p: &Pt2| {
        let h = t * p.to_homogeneous();
        Pt2::new(h.x / h.z, h.y / h.z)
    };
    let problem = Problem {
        pts: inliers.iter().map(|c| (norm(&t1, &c.x), norm(&t2, &c.x_prime))).collect(),
        scale: (1.0 / s2, 1.0 / s1),
    };
    let t1i = t1.try_inverse().expect("similarity");
    let t2i = t2.try_inverse().expect("similarity");

    let mut fhat = project(&(t2i.transpose() * f0.matrix() * t1i)).ok_or(EpigeomError::DegenerateSample)?;
    let (mut cost, mut g, mut h) = problem.eval(&fhat, true);
    let mut history = vec![cost];
    let mut lambda = 1e-3 * (h.trace() / 9.0).max(f64::MIN_POSITIVE);
    let mut converged = false;

    for _ in 0..max_iter {
        if cost == 0.0 || g.amax() <= 1e-15 * cost.max(1e-300).sqrt() {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = h;
            for d in 0..9 {
                a[(d, d)] += lambda;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let Some(cand) = project(&to_mat(&(to_vec(&fhat) + step))) else {
                lambda *= 10.0;
                continue;
            };
            let (c_new, _, _) = problem.eval(&cand, false);
            if c_new < cost {
                let rel = (cost - c_new) / cost;
                fhat = cand;
                (cost, g, h) = problem.eval(&fhat, true);
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at any damping
            converged = true;
        }
        if converged {
            break;
        }
    }

    let f = FundamentalMatrix::new(t2.transpose() * fhat * t1)?;
    let q0 = symmetric_epipolar_error(f0, inliers)?;
    let q1 = symmetric_epipolar_error(&f, inliers)?;
    let f = if q1 <= q0 { f } else { *f0 };
    Ok(LmReport { f, history, converged })
}
