//! Analytic frontier points: contacts of the two planes through the
//! baseline that are tangent to each ellipsoid.

use std::io::Write;

use nalgebra::{Vector3, Vector4};

use super::{CameraPair, SceneScript, SynthError};
use crate::epigeom::Correspondence;
use crate::geometry::Pt2;

fn project(cams: &CameraPair, camera: usize, x: &Vector4<f64>) -> Pt2 {
    let p = cams.projection(camera) * x;
    Pt2::new(p.x / p.z, p.y / p.z)
}

/// The two frontier-point correspondences of every ellipsoid at frame `t`,
/// ellipsoid by ellipsoid. Within a pair, the first point lies on the side
/// of the plane through the baseline and the ellipsoid center that
/// `baseline x center` points to.
pub fn ground_truth_frontier_points(scene: &SceneScript, cams: &CameraPair, t: usize) -> Result<Vec<Correspondence>, SynthError> {
    let c1 = cams.center(0);
    let b = cams.center(1) - c1;
    // orthonormal pair spanning the normals of planes through the baseline
    let helper = if b.x.abs() < 0.9 * b.norm() { Vector3::x() } else { Vector3::y() };
    let u1 = b.cross(&helper).normalize();
    let u2 = b.cross(&u1).normalize();
    let plane = |n: &Vector3<f64>| Vector4::new(n.x, n.y, n.z, -n.dot(&c1));

    let mut out = Vec::with_capacity(2 * scene.ellipsoids.len());
    for (i, e) in scene.ellipsoids.iter().enumerate() {
        let q = e.dual_quadric(t);
        let (p1, p2) = (plane(&u1), plane(&u2));
        let m11 = p1.dot(&(q * p1));
        let m12 = p1.dot(&(q * p2));
        let m22 = p2.dot(&(q * p2));
        let det = m11 * m22 - m12 * m12;
        let scale = m11.abs().max(m22.abs()).max(f64::MIN_POSITIVE);
        if det >= -1e-12 * scale * scale {
            return Err(SynthError::FrontierUndefined { frame: t, ellipsoid: i });
        }
        // isotropic directions (alpha, beta) of [[m11, m12], [m12, m22]]
        let s = (-det).sqrt();
        let roots: [(f64, f64); 2] = if m11.abs() >= m22.abs() {
            [(-m12 + s, m11), (-m12 - s, m11)]
        } else {
            [(m22, -m12 + s), (m22, -m12 - s)]
        };
        let side = b.cross(&(e.center(t) - c1));
        let mut pair: Vec<(f64, Correspondence)> = roots
            .iter()
            .map(|&(a, bb)| {
                let pi = p1 * a + p2 * bb;
                let x = q * pi;
                let x = x / x.w;
                let key = side.dot(&(x.xyz() - e.center(t)));
                (key, Correspondence { x: project(cams, 0, &x), x_prime: project(cams, 1, &x), t, weight: 1.0 })
            })
            .collect();
        pair.sort_by(|a, b| b.0.total_cmp(&a.0));
        out.extend(pair.into_iter().map(|p| p.1));
    }
    Ok(out)
}

/// Ground truth for every frame, frame-major.
pub fn ground_truth_sequence(scene: &SceneScript, cams: &CameraPair) -> Result<Vec<Correspondence>, SynthError> {
    let mut all = Vec::new();
    for t in 0..scene.frames {
        all.extend(ground_truth_frontier_points(scene, cams, t)?);
    }
    Ok(all)
}

/// CSV with header `t,x,y,x_prime,y_prime`.
pub fn write_ground_truth_csv<W: Write>(out: W, pts: &[Correspondence]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "x_prime", "y_prime"])?;
    for c in pts {
        w.write_record([c.t.to_string(), c.x.x.to_string(), c.x.y.to_string(), c.x_prime.x.to_string(), c.x_prime.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
