//! Motion barcodes of corresponding epipolar lines through true frontier
//! points, against random line pairs.
//!
//! `cargo run --release --example barcodes -- [seed]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silhouette_calib::barcode::{barcode_similarity, BarcodeIndex, VertexPrior};
use silhouette_calib::geometry::{Line2, Pt2};
use silhouette_calib::synth::{generate_scene, ground_truth_sequence, render_silhouettes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let (scene, cams) = generate_scene("single-ellipsoid", seed, 100)?;
    let (left, right) = render_silhouettes(&scene, &cams)?;
    let f = cams.fundamental()?;
    let (il, ir) = (BarcodeIndex::new(&left), BarcodeIndex::new(&right));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_line = |rng: &mut ChaCha8Rng| {
        let p = Pt2::new(rng.random_range(160.0..480.0), rng.random_range(120.0..360.0));
        let q = Pt2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        Line2::through(&p, &q)
    };

    let gt = ground_truth_sequence(&scene, &cams)?;
    let (mut true_sum, mut rand_sum) = (0.0, 0.0);
    for (k, c) in gt.iter().enumerate() {
        let l1 = Line2::from_homogeneous(&f.line_in_left(&c.x_prime)).ok_or("degenerate line")?;
        let l2 = Line2::from_homogeneous(&f.line_in_right(&c.x)).ok_or("degenerate line")?;
        let (b1, b2) = (il.barcode(&l1), ir.barcode(&l2));
        let s_true = barcode_similarity(&b1, &b2)?;
        let (Some(a), Some(b)) = (random_line(&mut rng), random_line(&mut rng)) else { continue };
        let s_rand = barcode_similarity(&il.barcode(&a), &ir.barcode(&b))?;
        if k % 40 == 0 {
            println!("frame {:3}: epipolar {s_true:+.3} (prior {:.3}), random {s_rand:+.3}", c.t, VertexPrior::from_similarity(s_true).value());
            println!("  left  {b1}");
            println!("  right {b2}");
        }
        true_sum += s_true;
        rand_sum += s_rand;
    }
    let n = gt.len() as f64;
    println!("mean similarity over {} pairs: epipolar {:.3}, random {:.3}", gt.len(), true_sum / n, rand_sum / n);
    Ok(())
}
