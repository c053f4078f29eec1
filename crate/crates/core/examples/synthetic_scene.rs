//! Writes a synthetic bundle: masks for both cameras, scene JSON and ground
//! truth. Also shows the rig where frontier points do not exist.
//!
//! `cargo run --release --example synthetic_scene -- <out_dir> [preset] [seed]`

use std::path::PathBuf;

use silhouette_calib::experiment::{synthesize, write_bundle};
use silhouette_calib::synth::{degenerate_scene, generate_scene, SceneFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).ok_or("usage: synthetic_scene <out_dir> [preset] [seed]")?);
    let preset = args.get(2).map_or("articulated-pair", String::as_str);
    let seed: u64 = args.get(3).map_or(Ok(0), |s| s.parse())?;

    let (scene, cameras) = generate_scene(preset, seed, 100)?;
    let file = SceneFile { scene, cameras };
    let (left, right, gt) = synthesize(&file, None)?;
    write_bundle(&out, &file, &left, &right, &gt)?;
    let area: usize = left.frames().iter().map(|m| m.foreground_count()).sum();
    println!("{preset} seed {seed}: {} frames, mean silhouette area {} px", left.len(), area / left.len());
    println!("{} ground-truth correspondences written to {}", gt.points.len(), out.display());
    println!("F_gt {:?}", gt.f.row_major().map(|v| format!("{v:.3e}")));

    match synthesize(&degenerate_scene(10), None) {
        Ok(_) => println!("degenerate rig unexpectedly produced frontier points"),
        Err(e) => println!("degenerate rig: {e} (exit code {})", e.exit_code()),
    }
    Ok(())
}
