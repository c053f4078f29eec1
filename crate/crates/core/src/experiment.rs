//! Synthetic experiment bundles, evaluation against ground truth and batch
//! runs over presets and seeds.
//!
//! A bundle directory holds
//!
//! ```text
//! left/  right/        mask sequences with manifests
//! scene.json           scene and rig
//! ground_truth.csv     t,x,y,x_prime,y_prime
//! f_gt.json            {"F": [9 values, row-major]}
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::epigeom::{
    correspondence_error, expected_iterations, ransac_gt_selection, symmetric_epipolar_error, CalibrationResult,
    Correspondence, FundamentalMatrix, REPORT_THRESHOLDS,
};
use crate::geometry::Pt2;
use crate::mask::SilhouetteSequence;
use crate::pipeline::{calibrate_sequences, write_outputs, PipelineConfig, PipelineError, Stage};
use crate::seed::derive_seed;
use crate::synth::{add_boundary_noise, generate_scene, ground_truth_sequence, render_silhouettes, write_ground_truth_csv, SceneFile};

pub const LEFT_DIR: &str = "left";
pub const RIGHT_DIR: &str = "right";
pub const SCENE_FILE: &str = "scene.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const F_GT_FILE: &str = "f_gt.json";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const SUITE_FILE: &str = "suite.csv";

/// Confidence used for every expected-iteration count.
pub const REPORT_CONFIDENCE: f64 = 0.99;
/// Hypotheses per block in ground-truth selection mode.
pub const GT_SELECTION_BLOCK: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub f: FundamentalMatrix,
    pub points: Vec<Correspondence>,
}

#[derive(Serialize, Deserialize)]
struct FJson {
    #[serde(rename = "F")]
    f: [f64; 9],
}

fn io_err(stage: Stage) -> impl Fn(&Path, std::io::Error) -> PipelineError {
    move |p, e| PipelineError::io(stage, p, e)
}

/// Frontier ground truth first, so a degenerate rig fails before any
/// rendering; then both sequences, optionally with boundary noise.
pub fn synthesize(
    file: &SceneFile,
    noise: Option<f64>,
) -> Result<(SilhouetteSequence, SilhouetteSequence, GroundTruth), PipelineError> {
    let points = ground_truth_sequence(&file.scene, &file.cameras).map_err(PipelineError::from_synth)?;
    let f = file.cameras.fundamental().map_err(|e| PipelineError::from_epigeom(Stage::Synth, e))?;
    let (mut l, mut r) = render_silhouettes(&file.scene, &file.cameras).map_err(PipelineError::from_synth)?;
    if let Some(p) = noise {
        if !(0.0..=1.0).contains(&p) {
            return Err(PipelineError::precondition(Stage::Synth, format!("noise probability {p} outside [0, 1]")));
        }
        let seed = file.scene.rng_seed;
        l = add_boundary_noise(&l, p, derive_seed(seed, "noise/left"));
        r = add_boundary_noise(&r, p, derive_seed(seed, "noise/right"));
    }
    Ok((l, r, GroundTruth { f, points }))
}

pub fn write_bundle(
    dir: &Path,
    file: &SceneFile,
    left: &SilhouetteSequence,
    right: &SilhouetteSequence,
    gt: &GroundTruth,
) -> Result<(), PipelineError> {
    let err = io_err(Stage::Synth);
    fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
    left.save_dir(&dir.join(LEFT_DIR), "png").map_err(PipelineError::from_mask)?;
    right.save_dir(&dir.join(RIGHT_DIR), "png").map_err(PipelineError::from_mask)?;
    let scene = dir.join(SCENE_FILE);
    fs::write(&scene, file.to_json() + "\n").map_err(|e| err(&scene, e))?;
    let fpath = dir.join(F_GT_FILE);
    let body = serde_json::to_string_pretty(&FJson { f: gt.f.row_major() }).expect("serializable");
    fs::write(&fpath, body + "\n").map_err(|e| err(&fpath, e))?;
    let gpath = dir.join(GROUND_TRUTH_FILE);
    let out = fs::File::create(&gpath).map_err(|e| err(&gpath, e))?;
    write_ground_truth_csv(out, &gt.points).map_err(|e| PipelineError::io(Stage::Synth, &gpath, e))
}

/// Reads `f_gt.json` and `ground_truth.csv` from a bundle directory.
pub fn read_ground_truth(dir: &Path) -> Result<GroundTruth, PipelineError> {
    let fpath = dir.join(F_GT_FILE);
    let gpath = dir.join(GROUND_TRUTH_FILE);
    for p in [&fpath, &gpath] {
        if !p.is_file() {
            return Err(PipelineError::precondition(Stage::Evaluation, format!("missing ground truth: {}", p.display())));
        }
    }
    let bad = |p: &Path, e: &dyn std::fmt::Display| PipelineError::io(Stage::Evaluation, p, e);
    let s = fs::read_to_string(&fpath).map_err(|e| bad(&fpath, &e))?;
    let j: FJson = serde_json::from_str(&s).map_err(|e| bad(&fpath, &e))?;
    let f = FundamentalMatrix::from_row_major(&j.f).map_err(|e| bad(&fpath, &e))?;

    let mut rdr = csv::Reader::from_path(&gpath).map_err(|e| bad(&gpath, &e))?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&gpath, &e))?;
        let v: Vec<f64> = rec.iter().map(|x| x.parse::<f64>()).collect::<Result<_, _>>().map_err(|e| bad(&gpath, &e))?;
        if v.len() != 5 {
            return Err(bad(&gpath, &format!("expected 5 columns, got {}", v.len())));
        }
        points.push(Correspondence { x: Pt2::new(v[1], v[2]), x_prime: Pt2::new(v[3], v[4]), t: v[0] as usize, weight: 1.0 });
    }
    Ok(GroundTruth { f, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub inlier_probability: f64,
    /// Correspondences whose error under the true matrix is within the threshold.
    pub within: usize,
    /// Expected RANSAC iterations per sample size, `None` at probability 0.
    pub expected: Vec<(usize, Option<u64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub correspondences: usize,
    pub inliers: usize,
    /// `Q` of the estimate over its own inliers.
    pub q_inliers: f64,
    /// `Q` of the estimate over the ground-truth frontier points.
    pub q_gt: f64,
    pub rows: Vec<ThresholdRow>,
    /// `Q` over ground truth of the ground-truth-selected estimate, when run.
    pub q_gt_selected: Option<f64>,
}

fn iterations_at(p: f64, s: usize) -> Option<u64> {
    if p >= 1.0 {
        Some(1)
    } else if p <= 0.0 {
        None
    } else {
        expected_iterations(p, s, REPORT_CONFIDENCE).ok()
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    /// Sample sizes for the expected-iteration rows, in output order.
    pub sample_sizes: Vec<usize>,
    /// Re-run estimation with ground-truth hypothesis selection using this
    /// iteration count, inlier threshold and seed.
    pub gt_selection: Option<(usize, f64, u64)>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self { sample_sizes: vec![8, 7], gt_selection: None }
    }
}

pub fn evaluate(
    result: &CalibrationResult,
    corrs: &[Correspondence],
    gt: &GroundTruth,
    opts: &EvaluateOptions,
) -> Result<EvaluationReport, PipelineError> {
    let ev = |e| PipelineError::from_epigeom(Stage::Evaluation, e);
    if gt.points.is_empty() {
        return Err(PipelineError::precondition(Stage::Evaluation, "ground truth has no points"));
    }
    let errs: Vec<f64> = corrs.iter().map(|c| correspondence_error(&gt.f, c)).collect();
    let rows = REPORT_THRESHOLDS
        .iter()
        .map(|&threshold| {
            let within = errs.iter().filter(|&&e| e <= threshold).count();
            let p = if corrs.is_empty() { 0.0 } else { within as f64 / corrs.len() as f64 };
            let expected = opts.sample_sizes.iter().map(|&s| (s, iterations_at(p, s))).collect();
            ThresholdRow { threshold, inlier_probability: p, within, expected }
        })
        .collect();
    let own: Vec<Correspondence> = result.inliers.iter().filter_map(|&i| corrs.get(i).copied()).collect();
    let q_inliers = if own.is_empty() { f64::NAN } else { symmetric_epipolar_error(&result.f, &own).map_err(ev)? };
    let q_gt = symmetric_epipolar_error(&result.f, &gt.points).map_err(ev)?;
    let q_gt_selected = match opts.gt_selection {
        Some((iters, thr, seed)) => {
            let r = ransac_gt_selection(corrs, &gt.points, iters, GT_SELECTION_BLOCK, thr, seed).map_err(ev)?;
            Some(symmetric_epipolar_error(&r.f, &gt.points).map_err(ev)?)
        }
        None => None,
    };
    Ok(EvaluationReport { correspondences: corrs.len(), inliers: result.inliers.len(), q_inliers, q_gt, rows, q_gt_selected })
}

impl EvaluationReport {
    pub fn probability_at(&self, threshold: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.threshold == threshold).map(|r| r.inlier_probability)
    }

    /// Long form: `metric,threshold,value`, threshold empty for scalars.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "threshold", "value"])?;
        w.write_record(["correspondences", "", &self.correspondences.to_string()])?;
        w.write_record(["inliers", "", &self.inliers.to_string()])?;
        w.write_record(["q_inliers", "", &self.q_inliers.to_string()])?;
        w.write_record(["q_gt", "", &self.q_gt.to_string()])?;
        if let Some(q) = self.q_gt_selected {
            w.write_record(["q_gt_selected", "", &q.to_string()])?;
        }
        for r in &self.rows {
            let thr = r.threshold.to_string();
            w.write_record(["inlier_probability", &thr, &r.inlier_probability.to_string()])?;
            w.write_record(["correspondences_within", &thr, &r.within.to_string()])?;
            for (s, n) in &r.expected {
                let v = n.map_or("inf".to_string(), |n| n.to_string());
                w.write_record([&format!("expected_iterations_s{s}"), &thr, &v])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// What one suite run measured.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteMetrics {
    pub correspondences: usize,
    pub inliers: usize,
    pub q_inliers: f64,
    pub q_gt: f64,
    pub inlier_prob_1: f64,
    pub inlier_prob_05: f64,
    pub degenerate_risk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub preset: String,
    pub seed: u64,
    pub outcome: Result<SuiteMetrics, PipelineError>,
}

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub presets: Vec<String>,
    pub seeds: Vec<u64>,
    pub frames: usize,
    pub noise: Option<f64>,
}

/// Generates, calibrates and evaluates one scene. The pipeline seed is the
/// scene seed offset by `cfg.rng_seed`.
pub fn run_scene(
    preset: &str,
    seed: u64,
    spec: &SuiteSpec,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<SuiteMetrics, PipelineError> {
    let (scene, cameras) = generate_scene(preset, seed, spec.frames).map_err(PipelineError::from_synth)?;
    let file = SceneFile { scene, cameras };
    let (l, r, gt) = synthesize(&file, spec.noise)?;
    let cfg = PipelineConfig { rng_seed: cfg.rng_seed.wrapping_add(seed), ..cfg.clone() };
    let run = calibrate_sequences(&l, &r, &cfg)?;
    let report = evaluate(&run.result, &run.correspondences, &gt, &EvaluateOptions::default())?;
    if let Some(dir) = out {
        write_outputs(dir, &run, &cfg)?;
        let p = dir.join(EVALUATION_FILE);
        let f = fs::File::create(&p).map_err(|e| PipelineError::io(Stage::Evaluation, &p, e))?;
        report.write_csv(f).map_err(|e| PipelineError::io(Stage::Evaluation, &p, e))?;
    }
    Ok(SuiteMetrics {
        correspondences: report.correspondences,
        inliers: report.inliers,
        q_inliers: report.q_inliers,
        q_gt: report.q_gt,
        inlier_prob_1: report.probability_at(1.0).unwrap_or(f64::NAN),
        inlier_prob_05: report.probability_at(0.5).unwrap_or(f64::NAN),
        degenerate_risk: run.solution.degenerate_risk,
    })
}

/// Every (preset, seed) in order; failures are recorded and skipped. With
/// `out`, each run writes into `out/<preset>/seed_<n>/`.
pub fn run_suite(spec: &SuiteSpec, cfg: &PipelineConfig, out: Option<&Path>) -> Vec<SuiteRow> {
    let mut rows = Vec::new();
    for preset in &spec.presets {
        for &seed in &spec.seeds {
            let dir = out.map(|o| o.join(preset).join(format!("seed_{seed}")));
            let outcome = run_scene(preset, seed, spec, cfg, dir.as_deref());
            if let Err(e) = &outcome {
                log::warn!("{preset} seed {seed}: {e}");
            }
            rows.push(SuiteRow { preset: preset.clone(), seed, outcome });
        }
    }
    rows
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

const SUITE_HEADER: [&str; 13] = [
    "preset",
    "seed",
    "status",
    "exit_code",
    "correspondences",
    "inliers",
    "q_inliers",
    "q_gt",
    "q_gt_median",
    "inlier_prob_1",
    "inlier_prob_0.5",
    "degenerate_risk",
    "error",
];

/// One row per run plus an `aggregate` row: means over successful runs,
/// the median of `q_gt`, the number of runs with degenerate risk, and the
/// failed runs listed in `error`.
pub fn write_suite_csv<W: Write>(rows: &[SuiteRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUITE_HEADER)?;
    for r in rows {
        let head = [r.preset.clone(), r.seed.to_string()];
        let rest: Vec<String> = match &r.outcome {
            Ok(m) => vec![
                "ok".into(),
                "0".into(),
                m.correspondences.to_string(),
                m.inliers.to_string(),
                m.q_inliers.to_string(),
                m.q_gt.to_string(),
                String::new(),
                m.inlier_prob_1.to_string(),
                m.inlier_prob_05.to_string(),
                m.degenerate_risk.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut v = vec!["failed".into(), e.exit_code().to_string()];
                v.extend(std::iter::repeat_n(String::new(), 8));
                v.push(e.to_string());
                v
            }
        };
        w.write_record(head.iter().chain(&rest))?;
    }

    let ok: Vec<&SuiteMetrics> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let failed: Vec<String> = rows.iter().filter(|r| r.outcome.is_err()).map(|r| format!("{}:{}", r.preset, r.seed)).collect();
    let col = |f: fn(&SuiteMetrics) -> f64| -> Vec<f64> { ok.iter().map(|m| f(m)).collect() };
    let stat = |v: Vec<f64>, g: fn(&[f64]) -> f64| if v.is_empty() { String::new() } else { g(&v).to_string() };
    let agg = vec![
        "aggregate".to_string(),
        String::new(),
        format!("{}/{}", ok.len(), rows.len()),
        if failed.is_empty() { "0" } else { "1" }.to_string(),
        stat(col(|m| m.correspondences as f64), mean),
        stat(col(|m| m.inliers as f64), mean),
        stat(col(|m| m.q_inliers), mean),
        stat(col(|m| m.q_gt), mean),
        stat(col(|m| m.q_gt), median),
        stat(col(|m| m.inlier_prob_1), mean),
        stat(col(|m| m.inlier_prob_05), mean),
        ok.iter().filter(|m| m.degenerate_risk).count().to_string(),
        failed.join(";"),
    ];
    w.write_record(&agg)?;
    w.flush()?;
    Ok(())
}
