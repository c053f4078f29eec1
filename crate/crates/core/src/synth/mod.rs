//! Synthetic two-camera scenes of moving ellipsoids with exact ground truth.
//!
//! Ellipsoids project to conics in closed form, so silhouettes, the true
//! fundamental matrix and the true frontier-point projections are all
//! analytic.

mod frontier;
mod render;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epigeom::{EpigeomError, FundamentalMatrix};
use crate::seed::derive_seed;

pub use frontier::{ground_truth_frontier_points, ground_truth_sequence, write_ground_truth_csv};
pub use render::{add_boundary_noise, outline_conic, render_frame, render_silhouettes, supersampled_mask};

pub const DEFAULT_WIDTH: usize = 640;
pub const DEFAULT_HEIGHT: usize = 480;
pub const DEFAULT_FRAMES: usize = 100;
pub const PRESETS: [&str; 3] = ["single-ellipsoid", "articulated-pair", "crossing-motion"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("ellipsoid {ellipsoid} leaves camera {camera} at frame {frame}")]
    OutOfFrame { frame: usize, camera: usize, ellipsoid: usize },
    #[error("epipole lies inside the outline of ellipsoid {ellipsoid} at frame {frame}")]
    FrontierUndefined { frame: usize, ellipsoid: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Geometry(#[from] EpigeomError),
}

/// Two pinhole cameras: the first at the origin looking down `+z`, the
/// second at `-R^T t`, mapping world points by `X -> R X + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPair {
    pub k1: Matrix3<f64>,
    pub k2: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraPair {
    /// Default rig: 800 px focal length, 640x480 images, the second camera
    /// orbiting the point 10 units ahead of the first by `angle_deg` about
    /// the vertical axis.
    pub fn orbit(angle_deg: f64) -> Self {
        let k = Matrix3::new(800.0, 0.0, 320.0, 0.0, 800.0, 240.0, 0.0, 0.0, 1.0);
        let pivot = Vector3::new(0.0, 0.0, 10.0);
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle_deg.to_radians());
        let c2 = pivot + rot * (-pivot);
        let r = rot.inverse().into_inner();
        Self { k1: k, k2: k, r, t: -(r * c2), width: DEFAULT_WIDTH, height: DEFAULT_HEIGHT }
    }

    /// Second camera `distance` units straight behind the first, same
    /// orientation: both epipoles sit at the principal point.
    pub fn inline(distance: f64) -> Self {
        let mut cams = Self::orbit(0.0);
        cams.t = Vector3::new(0.0, 0.0, distance);
        cams
    }

    pub fn projection(&self, camera: usize) -> Matrix3x4<f64> {
        let (k, r, t) = if camera == 0 {
            (self.k1, Matrix3::identity(), Vector3::zeros())
        } else {
            (self.k2, self.r, self.t)
        };
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        k * rt
    }

    pub fn center(&self, camera: usize) -> Vector3<f64> {
        if camera == 0 {
            Vector3::zeros()
        } else {
            -(self.r.transpose() * self.t)
        }
    }

    pub fn fundamental(&self) -> Result<FundamentalMatrix, EpigeomError> {
        FundamentalMatrix::from_cameras(&self.k1, &self.k2, &self.r, &self.t)
    }
}

/// One ellipsoid's path: per-frame centers and orientations (XYZ Euler
/// angles, radians) with fixed semi-axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidTrack {
    pub semi_axes: [f64; 3],
    pub centers: Vec<[f64; 3]>,
    pub orientations: Vec<[f64; 3]>,
}

impl EllipsoidTrack {
    /// Dual quadric `Q* = H diag(1,1,1,-1) H^T` at frame `t`.
    pub fn dual_quadric(&self, t: usize) -> Matrix4<f64> {
        let [a, b, c] = self.semi_axes;
        let [rx, ry, rz] = self.orientations[t];
        let u = Rotation3::from_euler_angles(rx, ry, rz).into_inner() * Matrix3::from_diagonal(&Vector3::new(a, b, c));
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&u);
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.center(t));
        h * Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0)) * h.transpose()
    }

    pub fn center(&self, t: usize) -> Vector3<f64> {
        Vector3::from(self.centers[t])
    }

    /// True when `p` is strictly inside the ellipsoid at frame `t`.
    pub fn contains(&self, t: usize, p: &Vector3<f64>) -> bool {
        let [a, b, c] = self.semi_axes;
        let [rx, ry, rz] = self.orientations[t];
        let local = Rotation3::from_euler_angles(rx, ry, rz).inverse() * (p - self.center(t));
        (local.x / a).powi(2) + (local.y / b).powi(2) + (local.z / c).powi(2) < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub preset: String,
    pub rng_seed: u64,
    pub frames: usize,
    pub ellipsoids: Vec<EllipsoidTrack>,
}

impl SceneScript {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.frames == 0 || self.ellipsoids.is_empty() {
            return Err(SynthError::InvalidScene("no frames or no ellipsoids".into()));
        }
        for (i, e) in self.ellipsoids.iter().enumerate() {
            if e.centers.len() != self.frames || e.orientations.len() != self.frames {
                return Err(SynthError::InvalidScene(format!("ellipsoid {i} track length differs from {}", self.frames)));
            }
            if !e.semi_axes.iter().all(|&s| s > 0.0 && s.is_finite()) {
                return Err(SynthError::InvalidScene(format!("ellipsoid {i} has a non-positive semi-axis")));
            }
        }
        Ok(())
    }
}

/// Scene plus rig, the on-disk form of a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub scene: SceneScript,
    pub cameras: CameraPair,
}

impl SceneFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, SynthError> {
        let f: SceneFile = serde_json::from_str(s).map_err(|e| SynthError::InvalidScene(e.to_string()))?;
        f.scene.validate()?;
        Ok(f)
    }
}

/// Three sinusoids at one to four times the base frequency. Amplitudes are
/// scaled so the peak rate of change is at most `SPEEDUP` times that of a
/// single base-frequency wave of amplitude `amp`.
fn wobble(rng: &mut ChaCha8Rng, amp: f64, cycles: f64, frames: usize) -> impl Fn(usize) -> f64 {
    const SPEEDUP: f64 = 1.5;
    let w = 2.0 * PI * cycles / frames as f64;
    let parts: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.5..1.0), rng.random_range(2.0..8.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let rate: f64 = parts.iter().map(|p| p.0 * p.1).sum();
    let amp = SPEEDUP * amp * rng.random_range(0.8..1.0) / rate;
    move |t| amp * parts.iter().map(|&(a, k, ph)| a * (k * w * t as f64 + ph).sin()).sum::<f64>()
}

/// Deterministic scene for `(preset, seed)` viewed by the default rig.
pub fn generate_scene(preset: &str, rng_seed: u64, frames: usize) -> Result<(SceneScript, CameraPair), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, &format!("synth/{preset}")));
    let frames = frames.max(2);
    // speeds scale with 1/T so a 100-frame run moves at most ~3 px per frame
    let cyc = frames as f64 / DEFAULT_FRAMES as f64;
    let ellipsoids = match preset {
        "single-ellipsoid" => {
            let axes = [rng.random_range(1.3..1.7), rng.random_range(0.8..1.0), rng.random_range(0.7..0.9)];
            let (x, y, z) = (wobble(&mut rng, 0.35, cyc, frames), wobble(&mut rng, 0.25, cyc, frames), wobble(&mut rng, 0.3, cyc, frames));
            let (ax, ay, az) = (wobble(&mut rng, 0.5, cyc, frames), wobble(&mut rng, 0.7, cyc, frames), wobble(&mut rng, 0.9, cyc, frames));
            vec![EllipsoidTrack {
                semi_axes: axes,
                centers: (0..frames).map(|t| [x(t), y(t), 10.0 + z(t)]).collect(),
                orientations: (0..frames).map(|t| [ax(t), ay(t), az(t)]).collect(),
            }]
        }
        "articulated-pair" => {
            let body_axes = [rng.random_range(0.7..0.9), rng.random_range(1.4..1.7), rng.random_range(0.6..0.7)];
            let limb_axes = [0.22, rng.random_range(0.9..1.1), 0.22];
            let (x, y) = (wobble(&mut rng, 0.3, cyc, frames), wobble(&mut rng, 0.15, cyc, frames));
            let yaw = wobble(&mut rng, 0.3, cyc, frames);
            let swing = wobble(&mut rng, 0.45, cyc, frames);
            let body: Vec<[f64; 3]> = (0..frames).map(|t| [x(t), y(t), 10.0]).collect();
            let limb: Vec<[f64; 3]> = (0..frames)
                .map(|t| {
                    // hangs from the right shoulder, swinging in the image plane
                    let a = 0.9 + swing(t);
                    let shoulder = [body[t][0] + body_axes[0] * 0.8, body[t][1] - body_axes[1] * 0.5, body[t][2]];
                    [shoulder[0] + limb_axes[1] * a.sin(), shoulder[1] + limb_axes[1] * a.cos(), shoulder[2]]
                })
                .collect();
            vec![
                EllipsoidTrack {
                    semi_axes: body_axes,
                    centers: body,
                    orientations: (0..frames).map(|t| [0.0, yaw(t), 0.0]).collect(),
                },
                EllipsoidTrack {
                    semi_axes: limb_axes,
                    centers: limb,
                    orientations: (0..frames).map(|t| [0.0, 0.0, -(0.9 + swing(t))]).collect(),
                },
            ]
        }
        "crossing-motion" => {
            // a thin rod, turned away from the baseline, that tilts through
            // horizontal: its two frontier points come within ~25 px
            let axes = [rng.random_range(1.6..1.9), rng.random_range(0.12..0.16), rng.random_range(0.12..0.16)];
            let (x, y) = (wobble(&mut rng, 0.3, cyc, frames), wobble(&mut rng, 0.2, cyc, frames));
            let tilt_phase = rng.random_range(0.0..2.0 * PI);
            let w = 2.0 * PI * cyc / frames as f64;
            vec![EllipsoidTrack {
                semi_axes: axes,
                centers: (0..frames).map(|t| [x(t), y(t), 10.0]).collect(),
                orientations: (0..frames).map(|t| [0.0, -0.6, 0.5 * (w * t as f64 + tilt_phase).sin()]).collect(),
            }]
        }
        other => return Err(SynthError::UnknownPreset(other.to_string())),
    };
    let scene = SceneScript { preset: preset.to_string(), rng_seed, frames, ellipsoids };
    Ok((scene, CameraPair::orbit(30.0)))
}

/// A sphere on the baseline of an inline rig: both epipoles fall inside
/// its outline, so frontier points are undefined.
pub fn degenerate_scene(frames: usize) -> SceneFile {
    let frames = frames.max(2);
    let scene = SceneScript {
        preset: "epipole-inside".into(),
        rng_seed: 0,
        frames,
        ellipsoids: vec![EllipsoidTrack {
            semi_axes: [1.0, 1.2, 1.0],
            centers: (0..frames).map(|t| [0.05 * (t as f64 * 0.3).sin(), 0.0, 10.0]).collect(),
            orientations: vec![[0.0; 3]; frames],
        }],
    };
    SceneFile { scene, cameras: CameraPair::inline(4.0) }
}
