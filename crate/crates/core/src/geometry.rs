//! Small 2D primitives shared by the silhouette and barcode code.

use nalgebra::{Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub type Pt2 = Point2<f64>;

/// Tolerance for on-boundary tests, in pixels.
pub const ON_BOUNDARY_TOL: f64 = 0.5;

/// An image line `a*x + b*y + c = 0` with `a^2 + b^2 = 1`.
///
/// When a line comes from a hull edge or a supporting line, `(a, b)` is the
/// outward normal, so the hull lies on the non-positive side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line2 {
    /// Line with unit normal `n` passing through `p`.
    pub fn from_normal_through(n: Vector2<f64>, p: &Pt2) -> Self {
        let n = n.normalize();
        Self {
            a: n.x,
            b: n.y,
            c: -(n.x * p.x + n.y * p.y),
        }
    }

    /// Normalizes homogeneous coefficients. Returns `None` for the line at infinity.
    pub fn from_homogeneous(l: &Vector3<f64>) -> Option<Self> {
        let n = l.x.hypot(l.y);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(Self {
            a: l.x / n,
            b: l.y / n,
            c: l.z / n,
        })
    }

    /// Line through `p` and `q`, normal pointing to the right of `p -> q`.
    pub fn through(p: &Pt2, q: &Pt2) -> Option<Self> {
        let d = q - p;
        let len = d.norm();
        if len == 0.0 {
            return None;
        }
        Some(Self::from_normal_through(Vector2::new(d.y, -d.x) / len, p))
    }

    #[inline]
    pub fn signed_distance(&self, p: &Pt2) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    #[inline]
    pub fn signed_distance_xy(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.a, self.b)
    }

    pub fn to_homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }
}

/// Exact orientation of three lattice points; positive for a left turn.
#[inline]
pub(crate) fn cross_i64(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Distance from `p` to the closed segment `[s, e]`.
pub fn point_segment_distance(p: &Pt2, s: &Pt2, e: &Pt2) -> f64 {
    let d = e - s;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - s).norm();
    }
    let t = ((p - s).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (s + d * t)).norm()
}
