//! Builds the trellis for a synthetic pair, extracts two separated paths and
//! checks them against every flow constraint.
//!
//! `cargo run --release --example trellis_matching -- [preset] [seed]`

use silhouette_calib::epigeom::correspondence_error;
use silhouette_calib::pipeline::{match_sequences, PipelineConfig, StageTimings};
use silhouette_calib::synth::{generate_scene, render_silhouettes};
use silhouette_calib::trellis::{check_flow_constraints, extract_correspondences};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let preset = args.get(1).map_or("crossing-motion", String::as_str);
    let seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;
    let (scene, cams) = generate_scene(preset, seed, 100)?;
    let (left, right) = render_silhouettes(&scene, &cams)?;

    let cfg = PipelineConfig::default();
    let mut timings = StageTimings::default();
    let (g, sol) = match_sequences(&left, &right, &cfg, &mut timings)?;
    println!("{} layers, widest {}, {} inner edges", g.frame_count(), g.max_layer_width(), g.inner_edge_count());
    println!("objective {:.2}, degenerate_risk {}", sol.objective, sol.degenerate_risk);
    let report = check_flow_constraints(&g, &sol);
    println!("constraints: {}", if report.is_feasible() { "all satisfied".to_string() } else { report.summary() });

    let closest = (0..g.frame_count())
        .map(|t| g.vertex(t, sol.paths[0][t]).pair_distance(g.vertex(t, sol.paths[1][t])))
        .fold(f64::INFINITY, f64::min);
    println!("closest approach of the two paths {closest:.1} px (C = {})", cfg.c_pixels);

    let corrs = extract_correspondences(&sol, &g, cfg.sim_threshold);
    let f = cams.fundamental()?;
    let good = corrs.iter().filter(|c| correspondence_error(&f, c) <= 1.0).count();
    println!("{} correspondences above similarity {}, {good} within 1 px of the true geometry", corrs.len(), cfg.sim_threshold);
    println!("matcher time {:.0} ms", timings.matcher().as_secs_f64() * 1e3);
    Ok(())
}
