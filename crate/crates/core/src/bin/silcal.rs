use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use silhouette_calib::barcode::write_barcodes_csv;
use silhouette_calib::experiment::{
    evaluate, read_ground_truth, run_suite, synthesize, write_bundle, write_suite_csv, EvaluateOptions, SuiteSpec,
    EVALUATION_FILE, SUITE_FILE,
};
use silhouette_calib::pipeline::{
    build_sequence_trellis, calibrate_sequences, load_pair, read_calibration, read_correspondences_csv,
    sequence_barcodes, sequence_critical_points, write_outputs, PipelineConfig, PipelineError, Stage, StageTimings,
    CALIBRATION_FILE, CORRESPONDENCES_FILE,
};
use silhouette_calib::synth::{generate_scene, SceneFile, DEFAULT_FRAMES, PRESETS};

#[derive(Parser)]
#[command(name = "silcal", version, about = "Two-view calibration from silhouette motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate F from two mask sequences.
    Calibrate {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a calibration run against a synthetic bundle's ground truth.
    Evaluate {
        /// Directory written by `calibrate`.
        #[arg(long)]
        run: PathBuf,
        /// Directory written by `synth`.
        #[arg(long)]
        truth: PathBuf,
        /// CSV destination; defaults to `<run>/evaluation.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample size for expected-iteration counts; 7 is always reported too.
        #[arg(long, default_value_t = 8)]
        sample_size: usize,
        /// Also re-estimate with hypotheses chosen against ground truth.
        #[arg(long)]
        gt_selection: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render a synthetic scene with ground truth.
    Synth {
        #[arg(long, default_value = "single-ellipsoid")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_FRAMES)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        /// Flip probability for pixels on the one-pixel boundary band.
        #[arg(long)]
        noise: Option<f64>,
        /// Scene JSON to render instead of a preset.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Synthesize, calibrate and evaluate across presets and seeds.
    Suite {
        /// Comma-separated presets; an empty list gives an empty report.
        #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = PRESETS.map(String::from))]
        presets: Vec<String>,
        /// `a..b` or a comma-separated list.
        #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long, default_value_t = DEFAULT_FRAMES)]
        frames: usize,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write the trellis (and optionally every tangent-line barcode) as text.
    DumpTrellis {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Barcode CSV for the left camera's tangent lines.
        #[arg(long)]
        barcodes: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
        return Ok(Seeds((a..b).collect()));
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|e| format!("{p}: {e}")))
        .collect::<Result<_, _>>()
        .map(Seeds)
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long)]
    c_pixels: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sim_threshold: Option<f64>,
    #[arg(long)]
    ransac_iters: Option<usize>,
    #[arg(long)]
    inlier_thresh: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the exact pair-state solver.
    #[arg(long)]
    exact: bool,
    /// Pair-transition budget for the exact solver.
    #[arg(long)]
    exact_budget: Option<u128>,
    #[arg(long)]
    layer_cap: Option<usize>,
    #[arg(long)]
    lm_iters: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig, PipelineError> {
        let d = PipelineConfig::default();
        let c = PipelineConfig {
            c_pixels: self.c_pixels.unwrap_or(d.c_pixels),
            sigma: self.sigma.unwrap_or(d.sigma),
            sim_threshold: self.sim_threshold.unwrap_or(d.sim_threshold),
            ransac_iterations: self.ransac_iters.unwrap_or(d.ransac_iterations),
            inlier_threshold: self.inlier_thresh.unwrap_or(d.inlier_threshold),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
            exact_solver: self.exact,
            exact_budget: self.exact_budget.unwrap_or(d.exact_budget),
            layer_cap: self.layer_cap.unwrap_or(d.layer_cap),
            lm_iterations: self.lm_iters.unwrap_or(d.lm_iterations),
            ..d
        };
        c.validate()?;
        Ok(c)
    }
}

fn write_file(stage: Stage, path: &Path, body: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(stage, dir, e))?;
    }
    fs::write(path, body).map_err(|e| PipelineError::io(stage, path, e))
}

fn csv_bytes(stage: Stage, path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| PipelineError::io(stage, path, e))?;
    Ok(buf)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Calibrate { left, right, out, config } => {
            let cfg = config.build()?;
            let (l, r) = load_pair(&left, &right)?;
            let run = calibrate_sequences(&l, &r, &cfg)?;
            write_outputs(&out, &run, &cfg)?;
            println!(
                "{} correspondences, {} inliers, Q {:.4}, degenerate_risk {}",
                run.correspondences.len(),
                run.result.inliers.len(),
                run.result.q_error,
                run.solution.degenerate_risk
            );
        }
        Command::Evaluate { run, truth, out, sample_size, gt_selection, config } => {
            let cfg = config.build()?;
            if sample_size == 0 {
                return Err(PipelineError::precondition(Stage::Config, "sample size must be positive"));
            }
            let gt = read_ground_truth(&truth)?;
            let result = read_calibration(&run.join(CALIBRATION_FILE))?;
            let corrs = read_correspondences_csv(&run.join(CORRESPONDENCES_FILE))?;
            let mut sizes = vec![sample_size];
            if sample_size != 7 {
                sizes.push(7);
            }
            let opts = EvaluateOptions {
                sample_sizes: sizes,
                gt_selection: gt_selection.then_some((cfg.ransac_iterations, cfg.inlier_threshold, cfg.rng_seed)),
            };
            let report = evaluate(&result, &corrs, &gt, &opts)?;
            let path = out.unwrap_or_else(|| run.join(EVALUATION_FILE));
            let body = csv_bytes(Stage::Evaluation, &path, |b| report.write_csv(b))?;
            write_file(Stage::Evaluation, &path, &body)?;
            println!("Q vs ground truth {:.4}", report.q_gt);
            for r in &report.rows {
                println!("  threshold {:<4} inlier probability {:.3} ({} correspondences)", r.threshold, r.inlier_probability, r.within);
            }
        }
        Command::Synth { preset, seed, frames, out, noise, scene } => {
            let file = match scene {
                Some(p) => {
                    let s = fs::read_to_string(&p).map_err(|e| PipelineError::io(Stage::Synth, &p, e))?;
                    SceneFile::from_json(&s).map_err(PipelineError::from_synth)?
                }
                None => {
                    let (scene, cameras) = generate_scene(&preset, seed, frames).map_err(PipelineError::from_synth)?;
                    SceneFile { scene, cameras }
                }
            };
            let (l, r, gt) = synthesize(&file, noise)?;
            write_bundle(&out, &file, &l, &r, &gt)?;
            println!("{} frames, {} ground-truth correspondences", l.len(), gt.points.len());
        }
        Command::Suite { presets, seeds, frames, noise, out, config } => {
            let cfg = config.build()?;
            let presets: Vec<String> = presets.into_iter().filter(|p| !p.is_empty()).collect();
            let spec = SuiteSpec { presets, seeds: seeds.0, frames, noise };
            let rows = run_suite(&spec, &cfg, Some(&out));
            let path = out.join(SUITE_FILE);
            let body = csv_bytes(Stage::Evaluation, &path, |b| write_suite_csv(&rows, b))?;
            write_file(Stage::Evaluation, &path, &body)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} runs, {} failed; report in {}", rows.len(), failed, path.display());
        }
        Command::DumpTrellis { left, right, out, barcodes, config } => {
            let cfg = config.build()?;
            let (l, r) = load_pair(&left, &right)?;
            let g = build_sequence_trellis(&l, &r, &cfg, &mut StageTimings::default())?;
            write_file(Stage::Trellis, &out, g.to_text().as_bytes())?;
            if let Some(path) = barcodes {
                let cps = sequence_critical_points(&l, 0, cfg.angular_resolution_deg)?;
                let rows = sequence_barcodes(&l, &cps);
                let body = csv_bytes(Stage::Barcode, &path, |b| write_barcodes_csv(b, &rows))?;
                write_file(Stage::Barcode, &path, &body)?;
            }
            println!("{} layers, {} vertices", g.frame_count(), g.layers().iter().map(Vec::len).sum::<usize>());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
