//! End-to-end calibration: masks to critical points, barcodes, trellis
//! matching and robust estimation of `F`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barcode::{barcode_similarity, BarcodeIndex, MotionBarcode, VertexPrior};
use crate::epigeom::{
    lm_refine, ransac_fundamental, symmetric_epipolar_error, CalibrationResult, Correspondence, EpigeomError, LmReport,
};
use crate::geometry::Line2;
use crate::hull::{frame_critical_points, CriticalPoint, SilhouetteError, DEFAULT_ANGULAR_RESOLUTION_DEG};
use crate::mask::{MaskError, SilhouetteSequence};
use crate::seed::derive_seed;
use crate::synth::SynthError;
use crate::trellis::{
    build_trellis, check_flow_constraints, extract_correspondences, solve_two_paths, solve_two_paths_exact, PairPriors,
    TrellisConfig, TrellisError, TrellisGraph, TwoPathSolution, DEFAULT_EXACT_BUDGET, DEFAULT_LAYER_CAP,
    DEFAULT_SEPARATION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Separation `C` between the two paths, in pixels.
    pub c_pixels: f64,
    /// Transition kernel width, in pixels.
    pub sigma: f64,
    /// Matched pairs below this barcode similarity are not passed to RANSAC.
    pub sim_threshold: f64,
    pub ransac_iterations: usize,
    /// Bound on `d(x', Fx)^2 + d(x, F^T x')^2` for an inlier.
    pub inlier_threshold: f64,
    pub rng_seed: u64,
    pub exact_solver: bool,
    pub exact_budget: u128,
    pub layer_cap: usize,
    pub angular_resolution_deg: f64,
    pub lm_iterations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            c_pixels: DEFAULT_SEPARATION,
            sigma: 1.0,
            sim_threshold: 0.95,
            ransac_iterations: 20000,
            inlier_threshold: 1.0,
            rng_seed: 0,
            exact_solver: false,
            exact_budget: DEFAULT_EXACT_BUDGET,
            layer_cap: DEFAULT_LAYER_CAP,
            angular_resolution_deg: DEFAULT_ANGULAR_RESOLUTION_DEG,
            lm_iterations: 100,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::new(Stage::Config, ErrorKind::Precondition, msg.to_string()));
        if !(self.c_pixels > 0.0 && self.c_pixels.is_finite()) {
            return bad("c_pixels must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(-1.0..=1.0).contains(&self.sim_threshold) {
            return bad("sim_threshold must lie in [-1, 1]");
        }
        if self.ransac_iterations == 0 {
            return bad("ransac_iterations must be at least 1");
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return bad("inlier_threshold must be positive");
        }
        if self.layer_cap < 2 {
            return bad("layer_cap must be at least 2");
        }
        if !(self.angular_resolution_deg > 0.0 && self.angular_resolution_deg <= 90.0) {
            return bad("angular resolution must lie in (0, 90] degrees");
        }
        Ok(())
    }

    fn trellis(&self) -> TrellisConfig {
        TrellisConfig { separation: self.c_pixels, sigma: self.sigma, layer_cap: self.layer_cap, prior_floor: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Input,
    Silhouette,
    Barcode,
    Trellis,
    Estimation,
    Synth,
    Evaluation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Silhouette => "silhouette",
            Stage::Barcode => "barcode",
            Stage::Trellis => "trellis",
            Stage::Estimation => "estimation",
            Stage::Synth => "synth",
            Stage::Evaluation => "evaluation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Precondition,
    DegenerateGeometry,
    Budget,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: String) -> Self {
        Self { stage, kind, message }
    }

    pub fn precondition(stage: Stage, message: impl fmt::Display) -> Self {
        Self::new(stage, ErrorKind::Precondition, message.to_string())
    }

    /// 2 precondition, 3 degenerate geometry, 4 budget exceeded.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Precondition => 2,
            ErrorKind::DegenerateGeometry => 3,
            ErrorKind::Budget => 4,
        }
    }

    pub fn from_mask(e: MaskError) -> Self {
        Self::precondition(Stage::Input, e)
    }

    pub fn from_silhouette(frame: usize, camera: usize, e: SilhouetteError) -> Self {
        let kind = match e {
            SilhouetteError::DegenerateMask => ErrorKind::DegenerateGeometry,
            _ => ErrorKind::Precondition,
        };
        Self::new(Stage::Silhouette, kind, format!("camera {camera}, frame {frame}: {e}"))
    }

    pub fn from_trellis(e: TrellisError) -> Self {
        let kind = match e {
            TrellisError::BudgetExceeded { .. } => ErrorKind::Budget,
            TrellisError::TooFewFrames { .. } | TrellisError::ShapeMismatch(_) | TrellisError::Malformed { .. } => {
                ErrorKind::Precondition
            }
            _ => ErrorKind::DegenerateGeometry,
        };
        Self::new(Stage::Trellis, kind, e.to_string())
    }

    pub fn from_epigeom(stage: Stage, e: EpigeomError) -> Self {
        let kind = match e {
            EpigeomError::TooFewCorrespondences { .. }
            | EpigeomError::NoModel
            | EpigeomError::DegenerateSample
            | EpigeomError::EmptyPointSet => ErrorKind::DegenerateGeometry,
            _ => ErrorKind::Precondition,
        };
        Self::new(stage, kind, e.to_string())
    }

    pub fn from_synth(e: SynthError) -> Self {
        let kind = match e {
            SynthError::FrontierUndefined { .. } | SynthError::Geometry(_) => ErrorKind::DegenerateGeometry,
            _ => ErrorKind::Precondition,
        };
        Self::new(Stage::Synth, kind, e.to_string())
    }

    pub fn io(stage: Stage, path: &Path, e: impl fmt::Display) -> Self {
        Self::precondition(stage, format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub silhouette: Duration,
    pub barcode: Duration,
    pub trellis: Duration,
    pub ransac: Duration,
    pub lm: Duration,
}

impl StageTimings {
    /// Time from masks to correspondences.
    pub fn matcher(&self) -> Duration {
        self.silhouette + self.barcode + self.trellis
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: CalibrationResult,
    /// Matcher output fed to RANSAC; `result.inliers` indexes into it.
    pub correspondences: Vec<Correspondence>,
    pub solution: TwoPathSolution,
    pub lm: LmReport,
    pub frames: usize,
    pub vertices: usize,
    pub inner_edges: usize,
    pub timings: StageTimings,
}

impl PipelineOutput {
    /// Matcher time expressed in RANSAC iterations of this run.
    pub fn matcher_cost_in_ransac_iterations(&self) -> f64 {
        let per_iter = self.timings.ransac.as_secs_f64() / self.result.iterations_used.max(1) as f64;
        if per_iter > 0.0 {
            self.timings.matcher().as_secs_f64() / per_iter
        } else {
            f64::INFINITY
        }
    }

    pub fn run_log(&self, cfg: &PipelineConfig) -> String {
        let t = &self.timings;
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let mut s = String::new();
        s.push_str(&format!("frames {}\n", self.frames));
        s.push_str(&format!("trellis vertices {} inner edges {}\n", self.vertices, self.inner_edges));
        s.push_str(&format!("solver {}\n", if self.solution.exact { "exact" } else { "iterative" }));
        s.push_str(&format!("objective {:.6}\n", self.solution.objective));
        s.push_str(&format!("degenerate_risk {}\n", self.solution.degenerate_risk));
        s.push_str(&format!("correspondences {} inliers {}\n", self.correspondences.len(), self.result.inliers.len()));
        s.push_str(&format!("q_error {:.6e}\n", self.result.q_error));
        s.push_str(&format!("lm iterations {} converged {}\n", self.lm.history.len().saturating_sub(1), self.lm.converged));
        s.push_str(&format!("time silhouette_ms {:.1}\n", ms(t.silhouette)));
        s.push_str(&format!("time barcode_ms {:.1}\n", ms(t.barcode)));
        s.push_str(&format!("time trellis_ms {:.1}\n", ms(t.trellis)));
        s.push_str(&format!("time ransac_ms {:.1} ({} iterations)\n", ms(t.ransac), cfg.ransac_iterations));
        s.push_str(&format!("time lm_ms {:.1}\n", ms(t.lm)));
        s.push_str(&format!("matcher_cost_ransac_iterations {:.0}\n", self.matcher_cost_in_ransac_iterations()));
        s
    }
}

/// Critical points of every frame of one camera, in parallel.
pub fn sequence_critical_points(
    seq: &SilhouetteSequence,
    camera: usize,
    angular_resolution_deg: f64,
) -> Result<Vec<Vec<CriticalPoint>>, PipelineError> {
    seq.frames()
        .par_iter()
        .enumerate()
        .map(|(t, m)| {
            frame_critical_points(m, t, angular_resolution_deg)
                .map(|(_, cps)| cps)
                .map_err(|e| PipelineError::from_silhouette(t, camera, e))
        })
        .collect()
}

fn tangent_barcodes(index: &BarcodeIndex, cps: &[CriticalPoint]) -> Vec<Vec<MotionBarcode>> {
    cps.iter().map(|cp| cp.tangents.lines.iter().map(|l| index.barcode(l)).collect()).collect()
}

/// Per-frame prior tables: each left/right pair scores the best barcode
/// correlation over its two tangent sets. Support is the smaller transition
/// count of the best-scoring barcode pair.
pub fn pair_priors(
    left: &SilhouetteSequence,
    right: &SilhouetteSequence,
    cps_left: &[Vec<CriticalPoint>],
    cps_right: &[Vec<CriticalPoint>],
) -> Result<Vec<PairPriors>, PipelineError> {
    let (il, ir) = (BarcodeIndex::new(left), BarcodeIndex::new(right));
    (0..cps_left.len())
        .into_par_iter()
        .map(|t| {
            let bl = tangent_barcodes(&il, &cps_left[t]);
            let br = tangent_barcodes(&ir, &cps_right[t]);
            let ones = |v: &Vec<Vec<MotionBarcode>>| -> Vec<Vec<u32>> {
                v.iter().map(|set| set.iter().map(|b| b.transitions() as u32).collect()).collect()
            };
            let (tl, tr) = (ones(&bl), ones(&br));
            let mut priors = Vec::with_capacity(bl.len() * br.len());
            let mut support = Vec::with_capacity(bl.len() * br.len());
            for (i, l) in bl.iter().enumerate() {
                for (j, r) in br.iter().enumerate() {
                    if l.is_empty() || r.is_empty() {
                        return Err(PipelineError::precondition(
                            Stage::Barcode,
                            format!("frame {t}: critical point {i}/{j} has no tangents"),
                        ));
                    }
                    let (mut best, mut sup) = (f64::NEG_INFINITY, 0);
                    for (a, ta) in l.iter().zip(&tl[i]) {
                        for (b, tb) in r.iter().zip(&tr[j]) {
                            let s = barcode_similarity(a, b)
                                .map_err(|e| PipelineError::precondition(Stage::Barcode, e))?;
                            let k = (*ta).min(*tb);
                            if s > best || (s == best && k > sup) {
                                best = s;
                                sup = k;
                            }
                        }
                    }
                    priors.push(VertexPrior::from_similarity(best));
                    support.push(sup);
                }
            }
            Ok(PairPriors { left_count: bl.len(), right_count: br.len(), priors, support })
        })
        .collect()
}

fn check_inputs(left: &SilhouetteSequence, right: &SilhouetteSequence) -> Result<(), PipelineError> {
    if left.len() != right.len() {
        return Err(PipelineError::precondition(
            Stage::Input,
            format!("sequences differ in length: {} vs {}", left.len(), right.len()),
        ));
    }
    if left.len() < 2 {
        return Err(PipelineError::precondition(Stage::Input, format!("need at least 2 frames, got {}", left.len())));
    }
    Ok(())
}

/// Every tangent line of every critical point of one camera with its
/// barcode, frame by frame; the debug dump behind `write_barcodes_csv`.
pub fn sequence_barcodes(seq: &SilhouetteSequence, cps: &[Vec<CriticalPoint>]) -> Vec<(Line2, MotionBarcode)> {
    let index = BarcodeIndex::new(seq);
    cps.iter()
        .flatten()
        .flat_map(|cp| cp.tangents.lines.iter().map(|l| (*l, index.barcode(l))))
        .collect()
}

/// Critical points, barcode priors and the trellis, without solving.
pub fn build_sequence_trellis(
    left: &SilhouetteSequence,
    right: &SilhouetteSequence,
    cfg: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<TrellisGraph, PipelineError> {
    cfg.validate()?;
    check_inputs(left, right)?;

    let clock = Instant::now();
    let cps_l = sequence_critical_points(left, 0, cfg.angular_resolution_deg)?;
    let cps_r = sequence_critical_points(right, 1, cfg.angular_resolution_deg)?;
    timings.silhouette = clock.elapsed();

    let clock = Instant::now();
    let priors = pair_priors(left, right, &cps_l, &cps_r)?;
    timings.barcode = clock.elapsed();

    let clock = Instant::now();
    let g = build_trellis(&cps_l, &cps_r, &priors, &cfg.trellis()).map_err(PipelineError::from_trellis)?;
    timings.trellis = clock.elapsed();
    Ok(g)
}

/// The matcher half of the pipeline: trellis and its solution.
pub fn match_sequences(
    left: &SilhouetteSequence,
    right: &SilhouetteSequence,
    cfg: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<(TrellisGraph, TwoPathSolution), PipelineError> {
    let g = build_sequence_trellis(left, right, cfg, timings)?;
    let clock = Instant::now();
    let sol = if cfg.exact_solver {
        solve_two_paths_exact(&g, cfg.exact_budget)
    } else {
        solve_two_paths(&g)
    }
    .map_err(PipelineError::from_trellis)?;
    timings.trellis += clock.elapsed();

    let report = check_flow_constraints(&g, &sol);
    if !report.is_feasible() {
        return Err(PipelineError::new(Stage::Trellis, ErrorKind::DegenerateGeometry, report.summary()));
    }
    info!(
        "trellis: {} frames, {} vertices, objective {:.3}, degenerate_risk {}",
        g.frame_count(),
        g.layers().iter().map(Vec::len).sum::<usize>(),
        sol.objective,
        sol.degenerate_risk
    );
    Ok((g, sol))
}

/// Runs the whole pipeline on two in-memory sequences.
pub fn calibrate_sequences(
    left: &SilhouetteSequence,
    right: &SilhouetteSequence,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let mut timings = StageTimings::default();
    let (g, solution) = match_sequences(left, right, cfg, &mut timings)?;
    let correspondences = extract_correspondences(&solution, &g, cfg.sim_threshold);
    info!("{} correspondences at similarity >= {}", correspondences.len(), cfg.sim_threshold);

    let clock = Instant::now();
    let ransac = ransac_fundamental(
        &correspondences,
        cfg.ransac_iterations,
        cfg.inlier_threshold,
        derive_seed(cfg.rng_seed, "estimation"),
    )
    .map_err(|e| PipelineError::from_epigeom(Stage::Estimation, e))?;
    timings.ransac = clock.elapsed();

    let clock = Instant::now();
    let est = |e| PipelineError::from_epigeom(Stage::Estimation, e);
    let pick = |idx: &[usize]| -> Vec<Correspondence> { idx.iter().map(|&i| correspondences[i]).collect() };
    let chosen = ransac.inliers;
    let lm = lm_refine(&ransac.f, &pick(&chosen), cfg.lm_iterations).map_err(est)?;
    timings.lm = clock.elapsed();
    let q_error = symmetric_epipolar_error(&lm.f, &pick(&chosen)).map_err(est)?;

    let result = CalibrationResult { f: lm.f, inliers: chosen, q_error, iterations_used: ransac.iterations_used };
    Ok(PipelineOutput {
        result,
        correspondences,
        solution,
        lm,
        frames: g.frame_count(),
        vertices: g.layers().iter().map(Vec::len).sum(),
        inner_edges: g.inner_edge_count(),
        timings,
    })
}

/// Loads two mask directories and checks they are compatible.
pub fn load_pair(left: &Path, right: &Path) -> Result<(SilhouetteSequence, SilhouetteSequence), PipelineError> {
    let l = SilhouetteSequence::load_dir(left).map_err(PipelineError::from_mask)?;
    let r = SilhouetteSequence::load_dir(right).map_err(PipelineError::from_mask)?;
    check_inputs(&l, &r)?;
    Ok((l, r))
}

pub fn write_correspondences_csv(path: &Path, corrs: &[Correspondence]) -> Result<(), PipelineError> {
    let err = |e: csv::Error| PipelineError::io(Stage::Input, path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["t", "x", "y", "x_prime", "y_prime", "weight"]).map_err(err)?;
    for c in corrs {
        w.write_record([
            c.t.to_string(),
            c.x.x.to_string(),
            c.x.y.to_string(),
            c.x_prime.x.to_string(),
            c.x_prime.y.to_string(),
            c.weight.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| PipelineError::io(Stage::Input, path, e))
}

/// Reads `t,x,y,x_prime,y_prime[,weight]` rows.
pub fn read_correspondences_csv(path: &Path) -> Result<Vec<Correspondence>, PipelineError> {
    let err = |e: csv::Error| PipelineError::io(Stage::Input, path, e);
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let num = |k: usize| -> Result<f64, PipelineError> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| PipelineError::io(Stage::Input, path, format!("row {}: bad column {k}", n + 1)))
        };
        let t = num(0)?;
        if t < 0.0 || t.fract() != 0.0 {
            return Err(PipelineError::io(Stage::Input, path, format!("row {}: bad frame index", n + 1)));
        }
        out.push(Correspondence {
            x: crate::geometry::Pt2::new(num(1)?, num(2)?),
            x_prime: crate::geometry::Pt2::new(num(3)?, num(4)?),
            t: t as usize,
            weight: if rec.len() > 5 { num(5)? } else { 1.0 },
        });
    }
    Ok(out)
}

/// Files written by [`write_outputs`].
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const CORRESPONDENCES_FILE: &str = "correspondences.csv";
pub const SOLUTION_FILE: &str = "solution.json";
pub const RUN_LOG_FILE: &str = "run.log";

/// Writes calibration, correspondences, solution and run log into `dir`.
pub fn write_outputs(dir: &Path, out: &PipelineOutput, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(Stage::Input, dir, e))?;
    let put = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| PipelineError::io(Stage::Input, &p, e))
    };
    put(CALIBRATION_FILE, out.result.to_json() + "\n")?;
    put(SOLUTION_FILE, out.solution.to_json() + "\n")?;
    put(RUN_LOG_FILE, out.run_log(cfg))?;
    write_correspondences_csv(&dir.join(CORRESPONDENCES_FILE), &out.correspondences)
}

pub fn read_calibration(path: &Path) -> Result<CalibrationResult, PipelineError> {
    let s = fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Input, path, e))?;
    CalibrationResult::from_json(&s).map_err(|e| PipelineError::io(Stage::Input, path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epigeom::symmetric_epipolar_error;
    use crate::synth::{generate_scene, ground_truth_sequence, render_silhouettes};

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.c_pixels, 15.0);
        assert_eq!(c.sigma, 1.0);
        assert_eq!(c.sim_threshold, 0.95);
        assert_eq!(c.inlier_threshold, 1.0);
    }

    #[test]
    fn bad_config_is_a_precondition_failure() {
        let c = PipelineConfig { sigma: 0.0, ..Default::default() };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn mismatched_lengths_are_attributed_to_input() {
        let (scene, cams) = generate_scene("single-ellipsoid", 0, 6).unwrap();
        let (l, r) = render_silhouettes(&scene, &cams).unwrap();
        let short = SilhouetteSequence::new(r.frames()[..4].to_vec()).unwrap();
        let e = calibrate_sequences(&l, &short, &PipelineConfig::default()).unwrap_err();
        assert_eq!(e.stage, Stage::Input);
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn synthetic_run_recovers_f() {
        let (scene, cams) = generate_scene("single-ellipsoid", 3, 100).unwrap();
        let (l, r) = render_silhouettes(&scene, &cams).unwrap();
        let out = calibrate_sequences(&l, &r, &PipelineConfig::default()).unwrap();
        let gt = ground_truth_sequence(&scene, &cams).unwrap();
        let q = symmetric_epipolar_error(&out.result.f, &gt).unwrap();
        assert!(q < 0.5, "{q}");
        assert!(out.lm.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn correspondences_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let cs = vec![
            Correspondence { x: crate::geometry::Pt2::new(1.5, 2.0), x_prime: crate::geometry::Pt2::new(3.0, 4.25), t: 7, weight: 0.97 },
            Correspondence::new(crate::geometry::Pt2::new(0.0, 1.0), crate::geometry::Pt2::new(2.0, 3.0)),
        ];
        write_correspondences_csv(&p, &cs).unwrap();
        assert_eq!(read_correspondences_csv(&p).unwrap(), cs);
    }
}
