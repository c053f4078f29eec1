//! Layer-by-layer shortest paths and the iterative two-path solver.

use super::{check_flow_constraints, TrellisError, TrellisGraph, TwoPathSolution};

/// Per-layer vertex flags, used as the forbidden set of [`shortest_path`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMask {
    offsets: Vec<usize>,
    flags: Vec<bool>,
}

impl VertexMask {
    pub fn empty(g: &TrellisGraph) -> Self {
        let offsets = layer_offsets(g);
        let flags = vec![false; *offsets.last().unwrap_or(&0)];
        Self { offsets, flags }
    }

    pub fn insert(&mut self, t: usize, k: usize) {
        self.flags[self.offsets[t] + k] = true;
    }

    pub fn contains(&self, t: usize, k: usize) -> bool {
        self.flags[self.offsets[t] + k]
    }

    pub fn forbid_layer(&mut self, t: usize) {
        self.flags[self.offsets[t]..self.offsets[t + 1]].iter_mut().for_each(|b| *b = true);
    }

    fn layer(&self, t: usize) -> &[bool] {
        &self.flags[self.offsets[t]..self.offsets[t + 1]]
    }
}

fn layer_offsets(g: &TrellisGraph) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(g.frame_count() + 1);
    offsets.push(0);
    for l in g.layers() {
        offsets.push(offsets[offsets.len() - 1] + l.len());
    }
    offsets
}

/// Minimum-weight source-to-target path avoiding `forbidden`.
///
/// Dynamic programming over layers in `O(T K^2)`; ties go to the smallest
/// predecessor id and, at the last layer, the smallest vertex id.
pub fn shortest_path(g: &TrellisGraph, forbidden: &VertexMask) -> Result<(Vec<usize>, f64), TrellisError> {
    let frames = g.frame_count();
    let off = &forbidden.offsets;
    let mut dist = vec![f64::INFINITY; off[frames]];
    let mut pred = vec![u32::MAX; off[frames]];

    for (k, (d, &f)) in dist[..off[1]].iter_mut().zip(forbidden.layer(0)).enumerate() {
        if !f {
            *d = g.source_weight(k);
        }
    }

    for t in 1..frames {
        let stage = &g.stages[t - 1];
        let (done, rest) = dist.split_at_mut(off[t]);
        let prev = &done[off[t - 1]..];
        let cur = &mut rest[..off[t + 1] - off[t]];
        let back = &mut pred[off[t]..off[t + 1]];
        for (i, &d) in prev.iter().enumerate() {
            if d == f64::INFINITY {
                continue;
            }
            let row = &stage.cost[i * stage.cols..(i + 1) * stage.cols];
            for ((c, b), &w) in cur.iter_mut().zip(back.iter_mut()).zip(row) {
                let cand = d + w;
                if cand < *c {
                    *c = cand;
                    *b = i as u32;
                }
            }
        }
        for (j, ((c, b), &f)) in cur.iter_mut().zip(back.iter_mut()).zip(forbidden.layer(t)).enumerate() {
            if f || *b == u32::MAX {
                *c = f64::INFINITY;
                *b = u32::MAX;
            } else {
                *c += g.vertex_cost[t][j];
            }
        }
    }

    let last = &dist[off[frames - 1]..];
    let (mut k, cost) = last
        .iter()
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |acc, (k, &d)| if d < acc.1 { (k, d) } else { acc });
    if k == usize::MAX {
        return Err(TrellisError::NoPath);
    }
    let mut path = vec![0; frames];
    for t in (0..frames).rev() {
        path[t] = k;
        if t > 0 {
            k = pred[off[t] + k] as usize;
        }
    }
    Ok((path, cost))
}

/// Iterative solver: shortest path, then block it with its exclusion
/// neighborhoods and take the shortest remaining path.
pub fn solve_two_paths(g: &TrellisGraph) -> Result<TwoPathSolution, TrellisError> {
    let (first, _) = shortest_path(g, &VertexMask::empty(g))?;
    let mut blocked = VertexMask::empty(g);
    for (t, &k) in first.iter().enumerate() {
        blocked.insert(t, k);
        for &m in g.exclusion(t, k) {
            blocked.insert(t, m);
        }
    }
    let (second, _) = shortest_path(g, &blocked).map_err(|e| match e {
        TrellisError::NoPath => TrellisError::NoSecondPath,
        e => e,
    })?;
    Ok(finish(g, [first, second], false))
}

pub(crate) fn finish(g: &TrellisGraph, paths: [Vec<usize>; 2], exact: bool) -> TwoPathSolution {
    let objective = path_log_odds(g, &paths[0]) + path_log_odds(g, &paths[1]);
    finish_with(g, paths, exact, objective)
}

pub(crate) fn finish_with(g: &TrellisGraph, paths: [Vec<usize>; 2], exact: bool, objective: f64) -> TwoPathSolution {
    let degenerate_risk = (0..g.frame_count()).any(|t| g.near_twice_separation(t, paths[0][t], paths[1][t]));
    TwoPathSolution {
        paths,
        objective,
        exact,
        degenerate_risk,
    }
}

/// Log-odds collected by one path: vertex terms plus transition terms.
pub(crate) fn path_log_odds(g: &TrellisGraph, path: &[usize]) -> f64 {
    let mut total = 0.0;
    for (t, &k) in path.iter().enumerate() {
        total -= g.vertex_cost[t][k];
        if t + 1 < path.len() {
            let s = &g.stages[t];
            let c = s.cost[k * s.cols + path[t + 1]];
            assert!(c.is_finite(), "path follows edges");
            total -= c;
        }
    }
    total
}

/// Objective of the integer program for a feasible solution: the summed
/// log-odds of every vertex and transition on both paths.
pub fn objective_value(g: &TrellisGraph, sol: &TwoPathSolution) -> Result<f64, TrellisError> {
    let report = check_flow_constraints(g, sol);
    if !report.is_feasible() {
        return Err(TrellisError::InfeasibleSolution(report.summary()));
    }
    Ok(path_log_odds(g, &sol.paths[0]) + path_log_odds(g, &sol.paths[1]))
}

/// Sum of the edge weights traversed by both paths (source and target edges
/// included). For feasible solutions this is `-objective_value`.
pub fn traversed_weight(g: &TrellisGraph, sol: &TwoPathSolution) -> Result<f64, TrellisError> {
    let mut total = 0.0;
    for path in &sol.paths {
        let Some(&k0) = path.first() else {
            return Err(TrellisError::InfeasibleSolution("empty path".into()));
        };
        total += g.source_weight(k0);
        for t in 0..path.len().saturating_sub(1) {
            total += g
                .edge_weight(t, path[t], path[t + 1])
                .ok_or_else(|| TrellisError::InfeasibleSolution(format!("no edge at stage {t}")))?;
        }
    }
    Ok(total)
}
