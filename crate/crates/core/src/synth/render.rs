//! Silhouette rasterization from projected outline conics.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CameraPair, EllipsoidTrack, SceneScript, SynthError};
use crate::mask::{SilhouetteMask, SilhouetteSequence};
use crate::seed::derive_seed;

/// Image outline of an ellipsoid: a point conic `C`, signed so that
/// `x^T C x < 0` inside, together with its dual `C*`.
pub fn outline_conic(track: &EllipsoidTrack, t: usize, cams: &CameraPair, camera: usize) -> Option<(Matrix3<f64>, Matrix3<f64>)> {
    let p = cams.projection(camera);
    let dual = p * track.dual_quadric(t) * p.transpose();
    let mut c = dual.try_inverse()?;
    let cen = p * track.center(t).push(1.0);
    if cen.z <= 0.0 {
        return None;
    }
    if cen.dot(&(c * cen)) > 0.0 {
        c = -c;
    }
    Some((c, dual))
}

/// Range of `u` over the conic along one image axis (0 = x, 1 = y), from its
/// two tangent lines perpendicular to that axis.
fn extent(dual: &Matrix3<f64>, axis: usize) -> Option<(f64, f64)> {
    let (a, b, c) = (dual[(2, 2)], dual[(axis, 2)], dual[(axis, axis)]);
    let disc = b * b - a * c;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let (r1, r2) = ((b - disc.sqrt()) / a, (b + disc.sqrt()) / a);
    Some((r1.min(r2), r1.max(r2)))
}

struct Footprint {
    conic: Matrix3<f64>,
    x: (f64, f64),
    y: (f64, f64),
}

fn footprint(scene: &SceneScript, cams: &CameraPair, camera: usize, t: usize, i: usize) -> Result<Footprint, SynthError> {
    let out = SynthError::OutOfFrame { frame: t, camera, ellipsoid: i };
    let track = &scene.ellipsoids[i];
    if track.contains(t, &cams.center(camera)) {
        return Err(out);
    }
    let (conic, dual) = outline_conic(track, t, cams, camera).ok_or(out.clone())?;
    let (x, y) = (extent(&dual, 0).ok_or(out.clone())?, extent(&dual, 1).ok_or(out.clone())?);
    let (w, h) = ((cams.width - 1) as f64, (cams.height - 1) as f64);
    if x.0 < 0.0 || y.0 < 0.0 || x.1 > w || y.1 > h {
        return Err(out);
    }
    Ok(Footprint { conic, x, y })
}

fn inside(c: &Matrix3<f64>, x: f64, y: f64) -> bool {
    let p = Vector3::new(x, y, 1.0);
    p.dot(&(c * p)) < 0.0
}

/// Union of the ellipsoid outlines at frame `t`: pixel `(x, y)` is
/// foreground when its center is strictly inside some conic.
pub fn render_frame(scene: &SceneScript, cams: &CameraPair, camera: usize, t: usize) -> Result<SilhouetteMask, SynthError> {
    let mut mask = SilhouetteMask::new(cams.width, cams.height);
    for i in 0..scene.ellipsoids.len() {
        let fp = footprint(scene, cams, camera, t, i)?;
        for y in fp.y.0.ceil() as usize..=fp.y.1.floor() as usize {
            for x in fp.x.0.ceil() as usize..=fp.x.1.floor() as usize {
                if inside(&fp.conic, x as f64, y as f64) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    Ok(mask)
}

/// Area-sampling reference with `n x n` samples per pixel: `Some(true)` when
/// more than half are inside, `Some(false)` when fewer, `None` on a tie.
pub fn supersampled_mask(scene: &SceneScript, cams: &CameraPair, camera: usize, t: usize, n: usize) -> Result<Vec<Option<bool>>, SynthError> {
    let fps: Vec<Footprint> = (0..scene.ellipsoids.len())
        .map(|i| footprint(scene, cams, camera, t, i))
        .collect::<Result<_, _>>()?;
    let offsets: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64 - 0.5).collect();
    let mut out = Vec::with_capacity(cams.width * cams.height);
    for y in 0..cams.height {
        for x in 0..cams.width {
            let mut hits = 0;
            for &dy in &offsets {
                for &dx in &offsets {
                    let (sx, sy) = (x as f64 + dx, y as f64 + dy);
                    if fps.iter().any(|f| inside(&f.conic, sx, sy)) {
                        hits += 1;
                    }
                }
            }
            out.push(match (2 * hits).cmp(&(n * n)) {
                std::cmp::Ordering::Greater => Some(true),
                std::cmp::Ordering::Less => Some(false),
                std::cmp::Ordering::Equal => None,
            });
        }
    }
    Ok(out)
}

/// Both cameras' sequences, rendered in parallel over frames.
pub fn render_silhouettes(scene: &SceneScript, cams: &CameraPair) -> Result<(SilhouetteSequence, SilhouetteSequence), SynthError> {
    scene.validate()?;
    let frames: Vec<(SilhouetteMask, SilhouetteMask)> = (0..scene.frames)
        .into_par_iter()
        .map(|t| Ok((render_frame(scene, cams, 0, t)?, render_frame(scene, cams, 1, t)?)))
        .collect::<Result<_, SynthError>>()?;
    let (l, r): (Vec<_>, Vec<_>) = frames.into_iter().unzip();
    let wrap = |v| SilhouetteSequence::new(v).map_err(|e| SynthError::InvalidScene(e.to_string()));
    Ok((wrap(l)?, wrap(r)?))
}

/// Salt-and-pepper noise on the one-pixel band on both sides of every
/// boundary: each band pixel flips with probability `prob`.
pub fn add_boundary_noise(seq: &SilhouetteSequence, prob: f64, seed: u64) -> SilhouetteSequence {
    let frames = seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("noise/{t}")));
            let mut out = m.clone();
            for y in 0..m.height() as i64 {
                for x in 0..m.width() as i64 {
                    let v = m.get_signed(x, y);
                    let band = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| m.get_signed(x + dx, y + dy) != v);
                    if band && rng.random_bool(prob) {
                        out.set(x as usize, y as usize, !v);
                    }
                }
            }
            out
        })
        .collect();
    SilhouetteSequence::new(frames).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::super::generate_scene;
    use super::*;
    use nalgebra::Vector4;

    fn sphere_scene(centers: Vec<[f64; 3]>) -> SceneScript {
        let frames = centers.len();
        SceneScript {
            preset: "test".into(),
            rng_seed: 0,
            frames,
            ellipsoids: vec![EllipsoidTrack { semi_axes: [1.0; 3], centers, orientations: vec![[0.0; 3]; frames] }],
        }
    }

    fn centroid(m: &SilhouetteMask) -> (f64, f64) {
        let n = m.foreground_count() as f64;
        let (sx, sy) = m.foreground_pixels().fold((0.0, 0.0), |(a, b), (x, y)| (a + x as f64, b + y as f64));
        (sx / n, sy / n)
    }

    #[test]
    fn centered_sphere_is_a_centered_disc() {
        let scene = sphere_scene(vec![[0.0, 0.0, 10.0]]);
        let cams = CameraPair::orbit(30.0);
        let m = render_frame(&scene, &cams, 0, 0).unwrap();
        let (cx, cy) = centroid(&m);
        assert!((cx - 320.0).abs() < 1e-9 && (cy - 240.0).abs() < 1e-9);
        // radius f / sqrt(d^2 - 1)
        let r = 800.0 / (99.0f64).sqrt();
        let area = m.foreground_count() as f64;
        assert!((area / (std::f64::consts::PI * r * r) - 1.0).abs() < 0.01);
        let (x0, _, x1, _) = m.bounding_box().unwrap();
        assert_eq!(x1 - 320, 320 - x0);
    }

    #[test]
    fn translation_moves_centroid_right() {
        let scene = sphere_scene((0..5).map(|t| [0.25 * t as f64, 0.0, 10.0]).collect());
        let cams = CameraPair::orbit(30.0);
        let xs: Vec<f64> = (0..5).map(|t| centroid(&render_frame(&scene, &cams, 0, t).unwrap()).0).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]), "{xs:?}");
    }

    #[test]
    fn out_of_frame_is_reported() {
        let scene = sphere_scene(vec![[3.8, 0.0, 10.0]]);
        assert!(matches!(
            render_frame(&scene, &CameraPair::orbit(30.0), 0, 0),
            Err(SynthError::OutOfFrame { frame: 0, camera: 0, ellipsoid: 0 })
        ));
    }

    #[test]
    fn center_rule_agrees_with_supersampling() {
        for preset in super::super::PRESETS {
            let (scene, cams) = generate_scene(preset, 3, 20).unwrap();
            for t in [0, 7, 15] {
                for cam in 0..2 {
                    let a = render_frame(&scene, &cams, cam, t).unwrap();
                    let b = supersampled_mask(&scene, &cams, cam, t, 4).unwrap();
                    let boundary = (0..a.height() as i64)
                        .flat_map(|y| (0..a.width() as i64).map(move |x| (x, y)))
                        .filter(|&(x, y)| a.is_boundary(x, y))
                        .count();
                    let differ = a.bits().iter().zip(&b).filter(|(p, q)| q.is_some_and(|q| q != **p)).count();
                    assert!((differ as f64) < 0.01 * boundary as f64, "{preset} t={t} cam={cam}: {differ} of {boundary}");
                }
            }
        }
    }

    #[test]
    fn noise_touches_only_the_band() {
        let (scene, cams) = generate_scene("single-ellipsoid", 1, 3).unwrap();
        let (l, _) = render_silhouettes(&scene, &cams).unwrap();
        let noisy = add_boundary_noise(&l, 0.5, 4);
        assert_eq!(noisy, add_boundary_noise(&l, 0.5, 4));
        for (a, b) in l.frames().iter().zip(noisy.frames()) {
            assert_ne!(a, b);
            for y in 0..a.height() as i64 {
                for x in 0..a.width() as i64 {
                    if a.get_signed(x, y) != b.get_signed(x, y) {
                        let v = a.get_signed(x, y);
                        assert!([(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| a.get_signed(x + dx, y + dy) != v));
                    }
                }
            }
        }
    }

    #[test]
    fn conic_contains_projected_surface_points() {
        // points on the ellipsoid surface project inside or on the outline
        let (scene, cams) = generate_scene("articulated-pair", 2, 10).unwrap();
        let tr = &scene.ellipsoids[1];
        let (c, _) = outline_conic(tr, 4, &cams, 1).unwrap();
        let p = cams.projection(1);
        let [a, b, cc] = tr.semi_axes;
        let [rx, ry, rz] = tr.orientations[4];
        let rot = nalgebra::Rotation3::from_euler_angles(rx, ry, rz);
        for k in 0..200 {
            let th = k as f64 * 0.37;
            let ph = k as f64 * 0.11;
            let local = Vector3::new(a * th.sin() * ph.cos(), b * th.sin() * ph.sin(), cc * th.cos());
            let x = p * Vector4::from((rot * local + tr.center(4)).push(1.0));
            let x = x / x.z;
            assert!(x.dot(&(c * x)) <= 1e-9 * c.norm() * x.norm_squared());
        }
    }
}
