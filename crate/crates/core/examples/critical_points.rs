//! Convex hull and critical points of one rendered silhouette, next to the
//! true frontier points of the same frame.
//!
//! `cargo run --release --example critical_points -- [frame]`

use silhouette_calib::hull::frame_critical_points;
use silhouette_calib::synth::{generate_scene, ground_truth_frontier_points, render_frame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t: usize = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let (scene, cams) = generate_scene("single-ellipsoid", 1, t + 1)?;
    let mask = render_frame(&scene, &cams, 0, t)?;
    let (hull, cps) = frame_critical_points(&mask, t, 2.0)?;

    println!("foreground pixels {}", mask.foreground_count());
    println!("hull vertices {}, area {:.0}", hull.len(), hull.signed_area().abs());
    println!("{} critical points, first ten:", cps.len());
    for (k, cp) in cps.iter().enumerate().take(10) {
        let kind = if cp.hull_vertex.is_some() { "vertex" } else { "edge midpoint" };
        println!("  {k:2} ({:6.1}, {:6.1}) {kind:13} {} tangent lines", cp.position.x, cp.position.y, cp.tangents.len());
    }
    for g in ground_truth_frontier_points(&scene, &cams, t)? {
        let near = cps.iter().map(|c| (c.position - g.x).norm()).fold(f64::INFINITY, f64::min);
        println!(
            "frontier point ({:.2}, {:.2}): {:.2} px from the hull, {:.2} px from the nearest critical point",
            g.x.x,
            g.x.y,
            hull.boundary_distance(&g.x),
            near
        );
    }
    Ok(())
}
