//! RANSAC and Levenberg-Marquardt on point pairs with known geometry and a
//! chosen share of outliers.
//!
//! `cargo run --release --example estimate_f -- [outlier_fraction] [noise_px]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use silhouette_calib::epigeom::{
    expected_iterations, lm_refine, ransac_fundamental, symmetric_epipolar_error, Correspondence,
};
use silhouette_calib::geometry::Pt2;
use silhouette_calib::synth::CameraPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let outliers: f64 = args.next().map_or(Ok(0.5), |s| s.parse())?;
    let noise: f64 = args.next().map_or(Ok(0.3), |s| s.parse())?;
    let cams = CameraPair::orbit(30.0);
    let f_gt = cams.fundamental()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let jitter = Normal::new(0.0, noise)?;

    let (p1, p2) = (cams.projection(0), cams.projection(1));
    let mut clean = Vec::new();
    let mut corrs = Vec::new();
    for _ in 0..300 {
        let x = nalgebra::Vector4::new(rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5), rng.random_range(8.0..12.0), 1.0);
        let (a, b) = (p1 * x, p2 * x);
        let c = Correspondence::new(Pt2::new(a.x / a.z, a.y / a.z), Pt2::new(b.x / b.z, b.y / b.z));
        clean.push(c);
        let mut c = c;
        if rng.random_bool(outliers) {
            c.x_prime = Pt2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        } else {
            c.x += nalgebra::Vector2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            c.x_prime += nalgebra::Vector2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
        }
        corrs.push(c);
    }

    let need = expected_iterations(1.0 - outliers, 8, 0.99)?;
    println!("{} pairs, {:.0}% outliers, {noise} px noise: {need} iterations expected", corrs.len(), 100.0 * outliers);
    let res = ransac_fundamental(&corrs, need as usize * 2, 1.0, 1)?;
    println!("RANSAC: {} inliers, Q {:.4}, Q on clean points {:.4}", res.inliers.len(), res.q_error, symmetric_epipolar_error(&res.f, &clean)?);

    let inl: Vec<Correspondence> = res.inliers.iter().map(|&i| corrs[i]).collect();
    let lm = lm_refine(&res.f, &inl, 100)?;
    let hist: Vec<String> = lm.history.iter().map(|q| format!("{q:.4}")).collect();
    println!("LM cost per accepted step: {}", hist.join(" "));
    println!("refined: Q on clean points {:.4}, distance to F_gt {:.2e}", symmetric_epipolar_error(&lm.f, &clean)?, lm.f.scale_distance(&f_gt));
    Ok(())
}
