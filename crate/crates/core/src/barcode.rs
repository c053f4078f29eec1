//! Motion barcodes of image lines and the two probability estimators that
//! feed the trellis: the cross-view similarity prior of a critical-point pair
//! and the Gaussian transition prior between consecutive pairs.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Line2, Pt2};
use crate::hull::{convex_hull_of_lattice, CriticalPoint};
use crate::mask::{SilhouetteMask, SilhouetteSequence};

/// Floor/ceiling applied to every probability so log-odds stay finite.
pub const PROB_EPS: f64 = 1e-6;

/// A foreground pixel "meets" a line when its center is this close to it.
const HIT_DISTANCE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarcodeError {
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("barcode lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("critical point has an empty tangent set")]
    EmptyTangents,
}

/// Binary sequence, one bit per frame: does the line meet the silhouette?
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MotionBarcode {
    len: usize,
    words: Vec<u64>,
}

impl MotionBarcode {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (t, &v) in bits.iter().enumerate() {
            if v {
                b.set(t);
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, t: usize) -> bool {
        self.words[t / 64] >> (t % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, t: usize) {
        self.words[t / 64] |= 1 << (t % 64);
    }

    /// Number of adjacent frame pairs whose bits differ.
    pub fn transitions(&self) -> usize {
        (1..self.len).filter(|&t| self.get(t) != self.get(t - 1)).count()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|t| self.get(t)).collect()
    }

    /// Bit-wise complement (within the barcode length).
    pub fn complement(&self) -> Self {
        let mut out = Self::zeros(self.len);
        for t in 0..self.len {
            if !self.get(t) {
                out.set(t);
            }
        }
        out
    }

    fn count_and(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

impl std::fmt::Display for MotionBarcode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for t in 0..self.len {
            f.write_str(if self.get(t) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Pearson correlation of two binary sequences; 0 if either is constant.
pub fn barcode_similarity(b1: &MotionBarcode, b2: &MotionBarcode) -> Result<f64, BarcodeError> {
    if b1.len != b2.len {
        return Err(BarcodeError::LengthMismatch(b1.len, b2.len));
    }
    let n = b1.len as f64;
    let n1 = b1.count_ones() as f64;
    let n2 = b2.count_ones() as f64;
    let var = n1 * (n - n1) * n2 * (n - n2);
    if var == 0.0 {
        return Ok(0.0);
    }
    let n12 = b1.count_and(b2) as f64;
    Ok(((n * n12 - n1 * n2) / var.sqrt()).clamp(-1.0, 1.0))
}

/// Row and column runs of one frame, for fast line/silhouette intersection.
#[derive(Debug, Clone)]
struct FrameIndex {
    bbox: Option<(i64, i64, i64, i64)>,
    /// `rows[y - y0]`: sorted inclusive x-runs of foreground.
    rows: Vec<Vec<(i64, i64)>>,
    /// `cols[x - x0]`: sorted inclusive y-runs of foreground.
    cols: Vec<Vec<(i64, i64)>>,
    /// Outward unit normals and offsets of the hull edges, pushed out by
    /// the hit distance. Empty when the foreground is collinear.
    slab: Vec<(f64, f64, f64)>,
}

fn runs_of(len: usize, mut at: impl FnMut(usize) -> bool) -> Vec<(i64, i64)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < len {
        if at(i) {
            let s = i;
            while i + 1 < len && at(i + 1) {
                i += 1;
            }
            runs.push((s as i64, i as i64));
        }
        i += 1;
    }
    runs
}

fn runs_overlap(runs: &[(i64, i64)], lo: i64, hi: i64) -> bool {
    let k = runs.partition_point(|r| r.1 < lo);
    k < runs.len() && runs[k].0 <= hi
}

impl FrameIndex {
    fn new(mask: &SilhouetteMask) -> Self {
        let Some((x0, y0, x1, y1)) = mask.bounding_box() else {
            return Self {
                bbox: None,
                rows: vec![],
                cols: vec![],
                slab: vec![],
            };
        };
        let rows: Vec<Vec<(i64, i64)>> = (y0..=y1).map(|y| runs_of(mask.width(), |x| mask.get(x, y))).collect();
        let cols = (x0..=x1).map(|x| runs_of(mask.height(), |y| mask.get(x, y))).collect();
        let ends: Vec<(i64, i64)> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .flat_map(|(dy, r)| {
                let y = y0 as i64 + dy as i64;
                [(r[0].0, y), (r[r.len() - 1].1, y)]
            })
            .collect();
        let slab = match convex_hull_of_lattice(ends) {
            Ok(hull) => (0..hull.len())
                .map(|i| {
                    let (p, q) = hull.edge(i);
                    let e = q - p;
                    let n = nalgebra::Vector2::new(e.y, -e.x).normalize();
                    (n.x, n.y, n.dot(&p.coords) + HIT_DISTANCE)
                })
                .collect(),
            Err(_) => vec![],
        };
        Self {
            bbox: Some((x0 as i64, y0 as i64, x1 as i64, y1 as i64)),
            rows,
            cols,
            slab,
        }
    }

    /// Range of the coordinate `axis` (0 = x, 1 = y) over the part of `l`
    /// inside the padded hull, or `None` when the line misses it. Every
    /// pixel center within the hit distance of `l` projects into that part.
    fn clip(&self, l: &Line2, axis: usize) -> Option<(f64, f64)> {
        if self.slab.is_empty() {
            return Some((f64::NEG_INFINITY, f64::INFINITY));
        }
        let n = l.normal();
        let (p0, d) = (Pt2::new(-l.c * n.x, -l.c * n.y), nalgebra::Vector2::new(-n.y, n.x));
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for &(nx, ny, h) in &self.slab {
            let a = nx * d.x + ny * d.y;
            let b = h - (nx * p0.x + ny * p0.y);
            if a.abs() < 1e-12 {
                if b < 0.0 {
                    return None;
                }
            } else if a > 0.0 {
                hi = hi.min(b / a);
            } else {
                lo = lo.max(b / a);
            }
            if lo > hi {
                return None;
            }
        }
        let (u, v) = (p0[axis] + lo * d[axis], p0[axis] + hi * d[axis]);
        Some((u.min(v), u.max(v)))
    }

    fn hits(&self, l: &Line2) -> bool {
        let Some((x0, y0, x1, y1)) = self.bbox else {
            return false;
        };
        let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].map(|(x, y)| l.signed_distance_xy(x as f64, y as f64));
        if corners.iter().all(|&d| d > HIT_DISTANCE) || corners.iter().all(|&d| d < -HIT_DISTANCE) {
            return false;
        }
        const SLACK: f64 = 1e-9;
        // walk the axis along which the line advances fastest, over the
        // stretch that lies inside the padded hull
        if l.a.abs() >= l.b.abs() {
            let Some((u, v)) = self.clip(l, 1) else { return false };
            let (ya, yb) = (y0.max((u - 1.0).floor().max(-1e9) as i64), y1.min((v + 1.0).ceil().min(1e9) as i64));
            for y in ya..=yb {
                let base = -l.c - l.b * y as f64;
                let (u, v) = ((base - HIT_DISTANCE) / l.a, (base + HIT_DISTANCE) / l.a);
                let lo = (u.min(v) - SLACK).ceil() as i64;
                let hi = (u.max(v) + SLACK).floor() as i64;
                let (lo, hi) = (lo.max(x0), hi.min(x1));
                if lo <= hi && runs_overlap(&self.rows[(y - y0) as usize], lo, hi) {
                    return true;
                }
            }
        } else {
            let Some((u, v)) = self.clip(l, 0) else { return false };
            let (xa, xb) = (x0.max((u - 1.0).floor().max(-1e9) as i64), x1.min((v + 1.0).ceil().min(1e9) as i64));
            for x in xa..=xb {
                let base = -l.c - l.a * x as f64;
                let (u, v) = ((base - HIT_DISTANCE) / l.b, (base + HIT_DISTANCE) / l.b);
                let lo = (u.min(v) - SLACK).ceil() as i64;
                let hi = (u.max(v) + SLACK).floor() as i64;
                let (lo, hi) = (lo.max(y0), hi.min(y1));
                if lo <= hi && runs_overlap(&self.cols[(x - x0) as usize], lo, hi) {
                    return true;
                }
            }
        }
        false
    }
}

/// Precomputed per-frame run tables of a sequence; builds barcodes in bulk.
#[derive(Debug, Clone)]
pub struct BarcodeIndex {
    frames: Vec<FrameIndex>,
}

impl BarcodeIndex {
    pub fn new(seq: &SilhouetteSequence) -> Self {
        Self {
            frames: seq.frames().par_iter().map(FrameIndex::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn barcode(&self, line: &Line2) -> MotionBarcode {
        let mut b = MotionBarcode::zeros(self.frames.len());
        for (t, f) in self.frames.iter().enumerate() {
            if f.hits(line) {
                b.set(t);
            }
        }
        b
    }
}

/// Barcode of `line` over `seq`: bit `t` is set iff some foreground pixel
/// center of frame `t` lies within half a pixel of the line.
pub fn motion_barcode(line: &Line2, seq: &SilhouetteSequence) -> Result<MotionBarcode, BarcodeError> {
    if seq.is_empty() {
        return Err(BarcodeError::EmptySequence);
    }
    Ok(BarcodeIndex::new(seq).barcode(line))
}

/// `P(pair is a true frontier match)`, clamped to `[eps, 1 - eps]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct VertexPrior(f64);

/// `P(true match at t+1 | true match at t)`, clamped like [`VertexPrior`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct TransitionPrior(f64);

#[inline]
fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        return PROB_EPS;
    }
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[inline]
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

macro_rules! probability_newtype {
    ($t:ident) => {
        impl $t {
            /// Clamps `p` into `[PROB_EPS, 1 - PROB_EPS]`.
            pub fn new(p: f64) -> Self {
                Self(clamp_prob(p))
            }

            pub fn value(self) -> f64 {
                self.0
            }

            /// Natural-log odds `ln(p / (1 - p))`.
            pub fn log_odds(self) -> f64 {
                logit(self.0)
            }
        }
    };
}

probability_newtype!(VertexPrior);
probability_newtype!(TransitionPrior);

impl VertexPrior {
    /// Affine map of a correlation in `[-1, 1]` onto a probability.
    pub fn from_similarity(s: f64) -> Self {
        Self::new((s + 1.0) / 2.0)
    }

    /// Inverse of [`from_similarity`](Self::from_similarity) (up to the clamp).
    pub fn similarity(self) -> f64 {
        2.0 * self.0 - 1.0
    }
}

/// Best similarity over all tangent pairs, and the resulting prior.
pub fn vertex_prior_from_barcodes(
    left: &[MotionBarcode],
    right: &[MotionBarcode],
) -> Result<(VertexPrior, f64), BarcodeError> {
    if left.is_empty() || right.is_empty() {
        return Err(BarcodeError::EmptyTangents);
    }
    let mut best = f64::NEG_INFINITY;
    for l in left {
        for r in right {
            best = best.max(barcode_similarity(l, r)?);
        }
    }
    Ok((VertexPrior::from_similarity(best), best))
}

/// Similarity prior of a left/right critical-point pair.
pub fn vertex_prior(
    cp_left: &CriticalPoint,
    cp_right: &CriticalPoint,
    seq_left: &SilhouetteSequence,
    seq_right: &SilhouetteSequence,
) -> Result<VertexPrior, BarcodeError> {
    if seq_left.is_empty() || seq_right.is_empty() {
        return Err(BarcodeError::EmptySequence);
    }
    let (il, ir) = (BarcodeIndex::new(seq_left), BarcodeIndex::new(seq_right));
    let bl: Vec<_> = cp_left.tangents.lines.iter().map(|l| il.barcode(l)).collect();
    let br: Vec<_> = cp_right.tangents.lines.iter().map(|l| ir.barcode(l)).collect();
    vertex_prior_from_barcodes(&bl, &br).map(|(p, _)| p)
}

/// Gaussian-kernel transition prior between pairs `(x, x')` at `t` and
/// `(y, y')` at `t + 1`; the distance is the norm of `[x - y, x' - y']`.
pub fn transition_prior(from: (Pt2, Pt2), to: (Pt2, Pt2), sigma: f64) -> TransitionPrior {
    assert!(sigma > 0.0, "sigma must be positive");
    let d2 = (from.0 - to.0).norm_squared() + (from.1 - to.1).norm_squared();
    TransitionPrior::new((-d2 / (2.0 * sigma * sigma)).exp())
}

/// Debug dump: one row per line with its coefficients and bit string.
pub fn write_barcodes_csv<W: Write>(out: W, rows: &[(Line2, MotionBarcode)]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "c", "bits"])?;
    for (l, b) in rows {
        w.write_record([l.a.to_string(), l.b.to_string(), l.c.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn bc(bits: &[u8]) -> MotionBarcode {
        MotionBarcode::from_bits(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    fn disc(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> SilhouetteMask {
        SilhouetteMask::from_fn(w, h, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
    }

    /// Direct per-pixel test, independent of the run tables.
    fn brute_hit(mask: &SilhouetteMask, l: &Line2) -> bool {
        mask.foreground_pixels()
            .any(|(x, y)| l.signed_distance_xy(x as f64, y as f64).abs() <= HIT_DISTANCE)
    }

    #[test]
    fn pearson_examples() {
        let b = bc(&[1, 0, 1, 0]);
        assert!((barcode_similarity(&b, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((barcode_similarity(&b, &b.complement()).unwrap() + 1.0).abs() < 1e-15);
        // hand computation: (4*1 - 2*1) / sqrt(2*2*1*3) = 1/sqrt(3)
        let s = barcode_similarity(&b, &bc(&[1, 0, 0, 0])).unwrap();
        assert!((s - 0.5774).abs() < 1e-4);
        assert!((s - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(barcode_similarity(&bc(&[1, 1, 1]), &bc(&[1, 0, 1])).unwrap(), 0.0);
        assert_eq!(barcode_similarity(&bc(&[1, 0]), &bc(&[1, 0, 1])), Err(BarcodeError::LengthMismatch(2, 3)));
    }

    #[test]
    fn long_barcodes_span_words() {
        let bits: Vec<bool> = (0..150).map(|t| t % 3 == 0).collect();
        let b = MotionBarcode::from_bits(&bits);
        assert_eq!(b.bits(), bits);
        assert_eq!(b.count_ones(), 50);
        assert_eq!(b.complement().count_ones(), 100);
        assert_eq!(b.transitions(), 99);
        assert_eq!(bc(&[1, 1, 0, 0, 1]).transitions(), 2);
    }

    #[test]
    fn missing_line_is_all_zero() {
        let seq = SilhouetteSequence::new(vec![disc(40, 40, 20.0, 20.0, 5.0); 4]).unwrap();
        let l = Line2::from_normal_through(Vector2::new(1.0, 0.0), &Pt2::new(35.0, 0.0));
        assert_eq!(motion_barcode(&l, &seq).unwrap(), MotionBarcode::zeros(4));
    }

    #[test]
    fn hit_miss_hit() {
        let seq = SilhouetteSequence::new(vec![
            disc(60, 40, 20.0, 20.0, 5.0),
            disc(60, 40, 40.0, 20.0, 5.0),
            disc(60, 40, 22.0, 20.0, 5.0),
        ])
        .unwrap();
        let l = Line2::from_normal_through(Vector2::new(1.0, 0.0), &Pt2::new(20.0, 0.0));
        assert_eq!(motion_barcode(&l, &seq).unwrap().bits(), vec![true, false, true]);
    }

    #[test]
    fn disc_center_line_hits() {
        let seq = SilhouetteSequence::new(vec![disc(40, 40, 20.0, 20.0, 5.0)]).unwrap();
        let l = Line2::from_normal_through(Vector2::new(1.0, 0.0), &Pt2::new(20.0, 7.0));
        assert!(brute_hit(seq.frame(0), &l));
        assert_eq!(motion_barcode(&l, &seq).unwrap().bits(), vec![true]);
        let empty: SilhouetteSequence = SilhouetteSequence::new(vec![SilhouetteMask::new(3, 3)]).unwrap();
        assert_eq!(motion_barcode(&l, &empty).unwrap().bits(), vec![false]);
    }

    #[test]
    fn half_pixel_boundary_is_inclusive() {
        let mut m = SilhouetteMask::new(10, 10);
        m.set(4, 4, true);
        let seq = SilhouetteSequence::new(vec![m]).unwrap();
        let at = |x: f64| Line2::from_normal_through(Vector2::new(1.0, 0.0), &Pt2::new(x, 0.0));
        assert!(motion_barcode(&at(4.5), &seq).unwrap().get(0));
        assert!(motion_barcode(&at(3.5), &seq).unwrap().get(0));
        assert!(!motion_barcode(&at(4.51), &seq).unwrap().get(0));
    }

    #[test]
    fn vertex_prior_mapping() {
        let b = vec![bc(&[1, 0, 1, 1, 0])];
        let (p, s) = vertex_prior_from_barcodes(&b, &b).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(p.value(), 1.0 - PROB_EPS);
        let (p, _) = vertex_prior_from_barcodes(&[bc(&[1, 1, 1])], &[bc(&[1, 0, 1])]).unwrap();
        assert_eq!(p.value(), 0.5);
        assert!((VertexPrior::from_similarity(0.9).value() - 0.95).abs() < 1e-15);
        assert_eq!(vertex_prior_from_barcodes(&[], &b), Err(BarcodeError::EmptyTangents));
    }

    #[test]
    fn vertex_prior_on_identical_sequences() {
        use crate::hull::frame_critical_points;
        let frames: Vec<_> = (0..6).map(|t| disc(60, 40, 15.0 + 5.0 * t as f64, 20.0, 6.0)).collect();
        let seq = SilhouetteSequence::new(frames).unwrap();
        let (_, cps) = frame_critical_points(seq.frame(2), 2, 2.0).unwrap();
        let p = vertex_prior(&cps[0], &cps[0], &seq, &seq).unwrap();
        assert_eq!(p.value(), 1.0 - PROB_EPS);
    }

    #[test]
    fn transition_prior_values() {
        let o = Pt2::new(3.0, 4.0);
        assert_eq!(transition_prior((o, o), (o, o), 1.0).value(), 1.0 - PROB_EPS);
        // d = sigma: split 3-4-5 across the two images, sigma = 5
        let t = transition_prior((o, o), (Pt2::new(6.0, 4.0), Pt2::new(3.0, 8.0)), 5.0);
        assert!((t.value() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((t.value() - 0.6065).abs() < 1e-4);
        let far = transition_prior((o, o), (Pt2::new(13.0, 4.0), o), 1.0);
        assert_eq!(far.value(), PROB_EPS);
    }

    #[test]
    fn csv_dump_has_header_and_bits() {
        let mut buf = Vec::new();
        let l = Line2 { a: 1.0, b: 0.0, c: -2.0 };
        write_barcodes_csv(&mut buf, &[(l, bc(&[1, 0, 1]))]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,c,bits\n1,0,-2,101\n");
    }

    fn arb_barcode_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<usize>)> {
        (2usize..90).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    proptest! {
        #[test]
        fn similarity_symmetric_and_permutation_invariant((a, b, perm) in arb_barcode_pair()) {
            let (ba, bb) = (MotionBarcode::from_bits(&a), MotionBarcode::from_bits(&b));
            let s = barcode_similarity(&ba, &bb).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert_eq!(s, barcode_similarity(&bb, &ba).unwrap());
            let pa: Vec<bool> = perm.iter().map(|&i| a[i]).collect();
            let pb: Vec<bool> = perm.iter().map(|&i| b[i]).collect();
            let sp = barcode_similarity(&MotionBarcode::from_bits(&pa), &MotionBarcode::from_bits(&pb)).unwrap();
            prop_assert!((s - sp).abs() < 1e-12);
        }

        #[test]
        fn vertex_prior_swaps(a in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 12), 1..4),
                              b in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 12), 1..4)) {
            let la: Vec<_> = a.iter().map(|v| MotionBarcode::from_bits(v)).collect();
            let lb: Vec<_> = b.iter().map(|v| MotionBarcode::from_bits(v)).collect();
            prop_assert_eq!(vertex_prior_from_barcodes(&la, &lb).unwrap(), vertex_prior_from_barcodes(&lb, &la).unwrap());
        }

        #[test]
        fn transition_prior_monotone_and_symmetric(d1 in 0.0f64..6.0, d2 in 0.0f64..6.0, sigma in 0.5f64..3.0) {
            let o = Pt2::new(1.0, 2.0);
            let at = |d: f64| transition_prior((o, o), (Pt2::new(1.0 + d, 2.0), o), sigma);
            let (p1, p2) = (at(d1), at(d2));
            let (lo, hi) = if d1 < d2 { (p2, p1) } else { (p1, p2) };
            prop_assert!(lo <= hi);
            let x = (Pt2::new(0.0, 1.0), Pt2::new(5.0, 5.0));
            let y = (Pt2::new(d1, 1.5), Pt2::new(5.0, 5.0 + d2));
            prop_assert_eq!(transition_prior(x, y, sigma), transition_prior(y, x, sigma));
        }

        #[test]
        fn run_table_matches_brute_force(cx in 5.0f64..35.0, cy in 5.0f64..25.0, r in 1.0f64..9.0,
                                         angle in 0.0f64..std::f64::consts::PI, off in -30.0f64..30.0) {
            let m = disc(40, 30, cx, cy, r);
            let n = Vector2::new(angle.cos(), angle.sin());
            let l = Line2::from_normal_through(n, &Pt2::new(cx + off * n.x, cy + off * n.y));
            let seq = SilhouetteSequence::new(vec![m.clone()]).unwrap();
            prop_assert_eq!(motion_barcode(&l, &seq).unwrap().get(0), brute_hit(&m, &l));
        }

        #[test]
        fn run_table_matches_brute_force_on_scattered_masks(bits in proptest::collection::vec(prop::bool::weighted(0.15), 24 * 18),
                                                           angle in 0.0f64..std::f64::consts::PI, off in -14.0f64..14.0) {
            let m = SilhouetteMask::from_bits(24, 18, bits).unwrap();
            let n = Vector2::new(angle.cos(), angle.sin());
            let l = Line2::from_normal_through(n, &Pt2::new(12.0 + off * n.x, 9.0 + off * n.y));
            let seq = SilhouetteSequence::new(vec![m.clone()]).unwrap();
            prop_assert_eq!(motion_barcode(&l, &seq).unwrap().get(0), brute_hit(&m, &l));
        }

        #[test]
        fn dilation_only_sets_bits(seed in proptest::collection::vec((5.0f64..35.0, 5.0f64..25.0, 1.0f64..7.0), 1..6),
                                   angle in 0.0f64..std::f64::consts::PI, off in -15.0f64..15.0) {
            let frames: Vec<_> = seed.iter().map(|&(x, y, r)| disc(40, 30, x, y, r)).collect();
            let dilated: Vec<_> = seed.iter().map(|&(x, y, r)| disc(40, 30, x, y, r + 1.5)).collect();
            let n = Vector2::new(angle.cos(), angle.sin());
            let l = Line2::from_normal_through(n, &Pt2::new(20.0 + off * n.x, 15.0 + off * n.y));
            let b0 = motion_barcode(&l, &SilhouetteSequence::new(frames).unwrap()).unwrap();
            let b1 = motion_barcode(&l, &SilhouetteSequence::new(dilated).unwrap()).unwrap();
            for t in 0..b0.len() {
                prop_assert!(!b0.get(t) || b1.get(t));
            }
        }
    }
}
