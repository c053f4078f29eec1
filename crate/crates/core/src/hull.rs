//! Convex hulls of silhouettes, their critical points, and the supporting
//! lines incident to each critical point.
//!
//! Pixel `(x, y)` is represented by its center, so all hull vertices are
//! lattice points and the hull is computed with exact integer predicates.
//! Polygons are oriented with positive signed area ("counter-clockwise" in
//! the usual x-right/y-up reading) and hull-edge lines carry outward normals.

use nalgebra::Vector2;
use thiserror::Error;

use crate::geometry::{cross_i64, point_segment_distance, Line2, Pt2, ON_BOUNDARY_TOL};
use crate::mask::SilhouetteMask;

/// Default angular step used to sample supporting lines at hull corners.
pub const DEFAULT_ANGULAR_RESOLUTION_DEG: f64 = 2.0;

const VERTEX_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SilhouetteError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("foreground pixels are collinear; no 2D hull")]
    DegenerateMask,
    #[error("point ({x:.3}, {y:.3}) is {distance:.3} px from the hull boundary")]
    NotOnHull { x: f64, y: f64, distance: f64 },
}

/// Strictly convex polygon with positively oriented vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHullPolygon {
    vertices: Vec<Pt2>,
}

impl ConvexHullPolygon {
    pub fn vertices(&self) -> &[Pt2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1` (cyclic).
    pub fn edge(&self, i: usize) -> (Pt2, Pt2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    /// Supporting line of edge `i`, outward normal.
    pub fn edge_line(&self, i: usize) -> Line2 {
        let (p, q) = self.edge(i);
        Line2::through(&p, &q).expect("hull vertices are distinct")
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
                p.x * q.y - q.x * p.y
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn boundary_distance(&self, p: &Pt2) -> f64 {
        (0..self.len())
            .map(|i| {
                let (s, e) = self.edge(i);
                point_segment_distance(p, &s, &e)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` is inside or within `tol` of the polygon.
    pub fn contains(&self, p: &Pt2, tol: f64) -> bool {
        (0..self.len()).all(|i| self.edge_line(i).signed_distance(p) <= tol)
    }

    fn lattice(&self) -> Vec<(i64, i64)> {
        self.vertices
            .iter()
            .map(|v| (v.x.round() as i64, v.y.round() as i64))
            .collect()
    }
}

/// Set of supporting lines through one critical point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TangentSet {
    pub lines: Vec<Line2>,
}

impl TangentSet {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// A point where the silhouette touches its convex hull.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub position: Pt2,
    pub frame: usize,
    pub tangents: TangentSet,
    /// Index of the hull vertex at this point, or `None` for a point inside an edge.
    pub hull_vertex: Option<usize>,
}

/// Convex hull of the foreground pixel centers.
pub fn extract_convex_hull(mask: &SilhouetteMask) -> Result<ConvexHullPolygon, SilhouetteError> {
    let mut pts = Vec::new();
    for (y, lo, hi) in mask.row_extremes() {
        pts.push((lo as i64, y as i64));
        if hi != lo {
            pts.push((hi as i64, y as i64));
        }
    }
    if pts.is_empty() {
        return Err(SilhouetteError::EmptyMask);
    }
    convex_hull_of_lattice(pts)
}

/// Andrew's monotone chain on lattice points; collinear points are dropped.
pub fn convex_hull_of_lattice(mut pts: Vec<(i64, i64)>) -> Result<ConvexHullPolygon, SilhouetteError> {
    if pts.is_empty() {
        return Err(SilhouetteError::EmptyMask);
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return Err(SilhouetteError::DegenerateMask);
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross_i64(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross_i64(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(SilhouetteError::DegenerateMask);
    }
    Ok(ConvexHullPolygon {
        vertices: hull.into_iter().map(|(x, y)| Pt2::new(x as f64, y as f64)).collect(),
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Hull points that also lie on the silhouette boundary, in hull order.
///
/// Every hull vertex is critical. Lattice points strictly inside a hull edge
/// are grouped into maximal foreground runs; runs attached to either end
/// vertex are absorbed by that vertex, and the longest detached run (if any)
/// contributes its middle pixel. Points carry frame index 0; see
/// [`frame_critical_points`] for per-frame extraction.
pub fn extract_critical_points(
    mask: &SilhouetteMask,
    hull: &ConvexHullPolygon,
    angular_resolution_deg: f64,
) -> Vec<CriticalPoint> {
    let lattice = hull.lattice();
    let n = lattice.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = hull.vertices[i];
        out.push(CriticalPoint {
            position: v,
            frame: 0,
            tangents: vertex_tangents(hull, i, angular_resolution_deg),
            hull_vertex: Some(i),
        });

        let (p, q) = (lattice[i], lattice[(i + 1) % n]);
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let g = gcd(dx, dy);
        if g < 4 {
            // an edge needs >= 3 interior lattice points to host a detached run
            continue;
        }
        let step = (dx / g, dy / g);
        let on = |k: i64| mask.get_signed(p.0 + k * step.0, p.1 + k * step.1);
        let mut best: Option<(i64, i64)> = None;
        let mut k = 1;
        while k < g {
            if !on(k) {
                k += 1;
                continue;
            }
            let start = k;
            while k + 1 < g && on(k + 1) {
                k += 1;
            }
            let end = k;
            k += 1;
            if start == 1 || end == g - 1 {
                continue;
            }
            if best.is_none_or(|(s, e)| end - start > e - s) {
                best = Some((start, end));
            }
        }
        if let Some((s, e)) = best {
            let mid = (s + e) / 2;
            let (x, y) = (p.0 + mid * step.0, p.1 + mid * step.1);
            if mask.is_boundary(x, y) {
                out.push(CriticalPoint {
                    position: Pt2::new(x as f64, y as f64),
                    frame: 0,
                    tangents: TangentSet {
                        lines: vec![hull.edge_line(i)],
                    },
                    hull_vertex: None,
                });
            }
        }
    }
    out
}

/// Hull and critical points of one frame, tagged with `frame`.
pub fn frame_critical_points(
    mask: &SilhouetteMask,
    frame: usize,
    angular_resolution_deg: f64,
) -> Result<(ConvexHullPolygon, Vec<CriticalPoint>), SilhouetteError> {
    let hull = extract_convex_hull(mask)?;
    let mut cps = extract_critical_points(mask, &hull, angular_resolution_deg);
    for cp in &mut cps {
        cp.frame = frame;
    }
    Ok((hull, cps))
}

/// Supporting lines of the hull through `point`.
///
/// At a vertex: both adjacent edge lines plus lines whose normals sweep the
/// vertex's normal cone in steps of at most `angular_resolution_deg`. Inside
/// an edge: that edge's line only.
pub fn incident_tangents(
    point: &Pt2,
    hull: &ConvexHullPolygon,
    angular_resolution_deg: f64,
) -> Result<TangentSet, SilhouetteError> {
    let n = hull.len();
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..n {
        let (s, e) = hull.edge(i);
        let d = e - s;
        let t = ((point - s).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        let dist = (point - (s + d * t)).norm();
        if dist < best.0 {
            best = (dist, i, t);
        }
    }
    let (dist, edge, t) = best;
    if dist > ON_BOUNDARY_TOL {
        return Err(SilhouetteError::NotOnHull {
            x: point.x,
            y: point.y,
            distance: dist,
        });
    }
    let edge_len = (hull.edge(edge).1 - hull.edge(edge).0).norm();
    if t * edge_len <= VERTEX_SNAP {
        Ok(vertex_tangents(hull, edge, angular_resolution_deg))
    } else if (1.0 - t) * edge_len <= VERTEX_SNAP {
        Ok(vertex_tangents(hull, (edge + 1) % n, angular_resolution_deg))
    } else {
        Ok(TangentSet {
            lines: vec![hull.edge_line(edge)],
        })
    }
}

fn vertex_tangents(hull: &ConvexHullPolygon, i: usize, angular_resolution_deg: f64) -> TangentSet {
    let n = hull.len();
    let incoming = hull.edge_line((i + n - 1) % n);
    let outgoing = hull.edge_line(i);
    let (n_in, n_out) = (incoming.normal(), outgoing.normal());
    let sweep = (n_in.x * n_out.y - n_in.y * n_out.x).atan2(n_in.dot(&n_out));
    let step = angular_resolution_deg.to_radians();
    let intervals = if step > 0.0 {
        ((sweep / step) - 1e-9).ceil().max(1.0) as usize
    } else {
        1
    };
    let v = hull.vertices[i];
    let phi0 = n_in.y.atan2(n_in.x);
    let mut lines = Vec::with_capacity(intervals + 1);
    lines.push(incoming);
    for k in 1..intervals {
        let phi = phi0 + sweep * k as f64 / intervals as f64;
        lines.push(Line2::from_normal_through(Vector2::new(phi.cos(), phi.sin()), &v));
    }
    lines.push(outgoing);
    TangentSet { lines }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect_mask(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> SilhouetteMask {
        SilhouetteMask::from_fn(w, h, |x, y| {
            rects.iter().any(|&(x0, y0, rw, rh)| x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh)
        })
    }

    fn disc_mask(w: usize, h: usize, discs: &[(f64, f64, f64)]) -> SilhouetteMask {
        SilhouetteMask::from_fn(w, h, |x, y| {
            discs
                .iter()
                .any(|&(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
        })
    }

    /// Brute-force hull: directed pairs (a, b) with every point on the left or
    /// on the closed segment are exactly the hull edges between extreme points.
    fn brute_force_hull_vertex_count(mask: &SilhouetteMask) -> usize {
        let pts: Vec<(i64, i64)> = mask.foreground_pixels().map(|(x, y)| (x as i64, y as i64)).collect();
        let mut edges = 0;
        for &a in &pts {
            for &b in &pts {
                if a == b {
                    continue;
                }
                let ok = pts.iter().all(|&p| {
                    let c = cross_i64(a, b, p);
                    if c != 0 {
                        return c > 0;
                    }
                    let d1 = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
                    let d2 = (p.0 - b.0) * (a.0 - b.0) + (p.1 - b.1) * (a.1 - b.1);
                    d1 >= 0 && d2 >= 0
                });
                if ok {
                    edges += 1;
                }
            }
        }
        edges
    }

    #[test]
    fn filled_square_hull_is_its_corners() {
        let m = rect_mask(20, 20, &[(0, 0, 10, 10)]);
        let hull = extract_convex_hull(&m).unwrap();
        let v: Vec<(f64, f64)> = hull.vertices().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(v, vec![(0.0, 0.0), (9.0, 0.0), (9.0, 9.0), (0.0, 9.0)]);
        assert!(hull.signed_area() > 0.0);
    }

    #[test]
    fn single_pixel_and_empty_masks_fail() {
        let mut m = SilhouetteMask::new(5, 5);
        assert_eq!(extract_convex_hull(&m), Err(SilhouetteError::EmptyMask));
        m.set(2, 2, true);
        assert_eq!(extract_convex_hull(&m), Err(SilhouetteError::DegenerateMask));
        let line = rect_mask(10, 10, &[(1, 4, 7, 1)]);
        assert_eq!(extract_convex_hull(&line), Err(SilhouetteError::DegenerateMask));
    }

    #[test]
    fn l_shape_hull_matches_brute_force() {
        let m = rect_mask(16, 16, &[(0, 0, 10, 4), (0, 0, 4, 10)]);
        let hull = extract_convex_hull(&m).unwrap();
        assert_eq!(brute_force_hull_vertex_count(&m), 5);
        assert_eq!(hull.len(), 5);
        let chord_ends = [Pt2::new(9.0, 3.0), Pt2::new(3.0, 9.0)];
        for c in &chord_ends {
            assert!(hull.vertices().contains(c));
        }
    }

    #[test]
    fn l_shape_critical_points_skip_the_chord() {
        let m = rect_mask(16, 16, &[(0, 0, 10, 4), (0, 0, 4, 10)]);
        let hull = extract_convex_hull(&m).unwrap();
        let cps = extract_critical_points(&m, &hull, 2.0);
        let (a, b) = (Pt2::new(9.0, 3.0), Pt2::new(3.0, 9.0));
        assert!(cps.iter().any(|c| c.position == a));
        assert!(cps.iter().any(|c| c.position == b));
        // per-pixel membership along the chord: interior lattice points are background
        for k in 1..6 {
            let p = Pt2::new(9.0 - k as f64, 3.0 + k as f64);
            assert!(!m.get(p.x as usize, p.y as usize));
            assert!(!cps.iter().any(|c| c.position == p));
        }
        assert_eq!(cps.len(), 5);
    }

    #[test]
    fn disc_critical_points_are_exactly_the_hull_vertices() {
        let m = disc_mask(64, 64, &[(31.3, 30.7, 17.2)]);
        let hull = extract_convex_hull(&m).unwrap();
        let cps = extract_critical_points(&m, &hull, 2.0);
        assert_eq!(cps.len(), hull.len());
        for (i, cp) in cps.iter().enumerate() {
            assert_eq!(cp.hull_vertex, Some(i));
            assert_eq!(cp.position, hull.vertices()[i]);
        }
    }

    #[test]
    fn two_discs_exclude_bridge_interiors() {
        let m = disc_mask(80, 48, &[(15.0, 20.0, 8.0), (60.0, 26.0, 11.0)]);
        let hull = extract_convex_hull(&m).unwrap();
        let cps = extract_critical_points(&m, &hull, 2.0);
        let in_disc = |p: &Pt2, cx: f64, cy: f64, r: f64| (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r;
        for cp in &cps {
            assert!(m.is_boundary(cp.position.x as i64, cp.position.y as i64));
            assert!(hull.boundary_distance(&cp.position) <= ON_BOUNDARY_TOL);
            assert!(in_disc(&cp.position, 15.0, 20.0, 8.0) || in_disc(&cp.position, 60.0, 26.0, 11.0));
        }
        // bridge edges join the two discs; brute-force scan of their pixels
        let mut bridges = 0;
        for i in 0..hull.len() {
            let (s, e) = hull.edge(i);
            if in_disc(&s, 15.0, 20.0, 8.0) != in_disc(&e, 15.0, 20.0, 8.0) {
                bridges += 1;
                for cp in &cps {
                    let d = point_segment_distance(&cp.position, &s, &e);
                    let interior = (cp.position - s).norm() > 1.0 && (cp.position - e).norm() > 1.0;
                    assert!(!(d <= ON_BOUNDARY_TOL && interior), "critical point on bridge interior");
                }
            }
        }
        assert_eq!(bridges, 2);
    }

    #[test]
    fn detached_run_on_an_edge_yields_one_midpoint() {
        // a "W"-like top: two towers and a short bump touching the hull edge y=0
        let m = rect_mask(30, 12, &[(0, 0, 3, 12), (27, 0, 3, 12), (12, 0, 5, 3), (0, 8, 30, 4)]);
        let hull = extract_convex_hull(&m).unwrap();
        let cps = extract_critical_points(&m, &hull, 2.0);
        let mids: Vec<_> = cps.iter().filter(|c| c.hull_vertex.is_none()).collect();
        assert_eq!(mids.len(), 1);
        assert_eq!(mids[0].position, Pt2::new(14.0, 0.0));
        assert_eq!(mids[0].tangents.len(), 1);
        assert!(cps.len() <= 2 * hull.len());
    }

    #[test]
    fn tangents_on_edge_interior_and_corner() {
        let m = rect_mask(20, 20, &[(0, 0, 10, 10)]);
        let hull = extract_convex_hull(&m).unwrap();
        let edge = incident_tangents(&Pt2::new(4.0, 0.0), &hull, 2.0).unwrap();
        assert_eq!(edge.len(), 1);
        let l = edge.lines[0];
        assert!((l.a - 0.0).abs() < 1e-12 && (l.b + 1.0).abs() < 1e-12 && l.c.abs() < 1e-12);

        let corner = incident_tangents(&Pt2::new(0.0, 0.0), &hull, 45.0).unwrap();
        assert_eq!(corner.len(), 3);
        let has = |a: f64, b: f64| corner.lines.iter().any(|l| (l.a - a).abs() < 1e-12 && (l.b - b).abs() < 1e-12);
        assert!(has(-1.0, 0.0)); // x = 0
        assert!(has(0.0, -1.0)); // y = 0
        let h = -std::f64::consts::FRAC_1_SQRT_2;
        assert!(has(h, h)); // 45 degree bisector

        // 2 degree default: 90 / 2 = 45 intervals
        assert_eq!(incident_tangents(&Pt2::new(0.0, 0.0), &hull, 2.0).unwrap().len(), 46);
    }

    #[test]
    fn tangents_reject_far_points() {
        let m = rect_mask(20, 20, &[(0, 0, 10, 10)]);
        let hull = extract_convex_hull(&m).unwrap();
        assert!(matches!(
            incident_tangents(&Pt2::new(5.0, 5.0), &hull, 2.0),
            Err(SilhouetteError::NotOnHull { .. })
        ));
        assert!(incident_tangents(&Pt2::new(5.0, -0.4), &hull, 2.0).is_ok());
    }

    fn random_mask() -> impl Strategy<Value = SilhouetteMask> {
        (6usize..24, 6usize..24, proptest::collection::vec(any::<bool>(), 24 * 24)).prop_map(|(w, h, bits)| {
            SilhouetteMask::from_fn(w, h, |x, y| bits[y * 24 + x])
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn hull_properties(mask in random_mask()) {
            let Ok(hull) = extract_convex_hull(&mask) else { return Ok(()); };
            let lattice = hull.lattice();
            let n = lattice.len();
            for i in 0..n {
                // strictly convex: every turn is a strict left turn
                prop_assert!(cross_i64(lattice[i], lattice[(i + 1) % n], lattice[(i + 2) % n]) > 0);
            }
            for (x, y) in mask.foreground_pixels() {
                prop_assert!(hull.contains(&Pt2::new(x as f64, y as f64), 1e-9));
            }
            // idempotence on the hull's own vertex set
            let again = convex_hull_of_lattice(lattice.clone()).unwrap();
            prop_assert_eq!(&again, &hull);
            let vmask = SilhouetteMask::from_fn(mask.width(), mask.height(), |x, y| lattice.contains(&(x as i64, y as i64)));
            prop_assert_eq!(extract_convex_hull(&vmask).unwrap(), hull.clone());

            let cps = extract_critical_points(&mask, &hull, 10.0);
            prop_assert!(cps.len() <= 2 * n);
            for cp in &cps {
                prop_assert!(hull.boundary_distance(&cp.position) <= ON_BOUNDARY_TOL);
                prop_assert!(mask.is_boundary(cp.position.x as i64, cp.position.y as i64));
                prop_assert!(!cp.tangents.is_empty());
                for l in &cp.tangents.lines {
                    prop_assert!(l.signed_distance(&cp.position).abs() <= ON_BOUNDARY_TOL);
                    for (x, y) in mask.foreground_pixels() {
                        prop_assert!(l.signed_distance_xy(x as f64, y as f64) <= ON_BOUNDARY_TOL);
                    }
                }
            }
        }
    }
}
