//! Synthetic scene in, fundamental matrix out, scored against ground truth.
//!
//! `cargo run --release --example end_to_end -- [preset] [seed]`

use silhouette_calib::epigeom::{inlier_probability_report, symmetric_epipolar_error, REPORT_THRESHOLDS};
use silhouette_calib::pipeline::{calibrate_sequences, PipelineConfig};
use silhouette_calib::synth::{generate_scene, ground_truth_sequence, render_silhouettes, DEFAULT_FRAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map_or("single-ellipsoid", String::as_str);
    let seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let (scene, cams) = generate_scene(preset, seed, DEFAULT_FRAMES)?;
    let (left, right) = render_silhouettes(&scene, &cams)?;
    let cfg = PipelineConfig { rng_seed: seed, ..Default::default() };
    let out = calibrate_sequences(&left, &right, &cfg)?;

    let gt = ground_truth_sequence(&scene, &cams)?;
    let f_gt = cams.fundamental()?;
    println!("correspondences {} inliers {}", out.correspondences.len(), out.result.inliers.len());
    println!("degenerate_risk {}", out.solution.degenerate_risk);
    println!("Q on inliers {:.4}", out.result.q_error);
    println!("Q on ground truth {:.4}", symmetric_epipolar_error(&out.result.f, &gt)?);
    for (thr, p) in inlier_probability_report(&out.correspondences, &f_gt, &REPORT_THRESHOLDS)? {
        println!("inlier probability at {thr}: {p:.3}");
    }
    print!("{}", out.run_log(&cfg));
    Ok(())
}
