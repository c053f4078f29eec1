//! Exact two-path solver over unordered vertex-pair states.
//!
//! A state at layer `t` is a pair `{i, j}` with `i < j` and `j` outside
//! `D(i)`. Moving between states matches the pair either straight or
//! crossed, so each step costs `O(K^4)` overall and the whole solve
//! `O(T K^4)`.

use super::solve::{finish_with, path_log_odds};
use super::{TrellisError, TrellisGraph, TwoPathSolution};

/// Default cap on the number of pair-to-pair transitions examined.
pub const DEFAULT_EXACT_BUDGET: u128 = 1_000_000_000;

#[derive(Clone, Copy)]
struct Back {
    prev: u32,
    crossed: bool,
}

fn push_feasible_pairs(g: &TrellisGraph, t: usize, out: &mut Vec<(u32, u32)>) {
    let n = g.layer(t).len();
    for i in 0..n {
        for j in i + 1..n {
            if !g.excludes(t, i, j) {
                out.push((i as u32, j as u32));
            }
        }
    }
}

/// Globally optimal pair of vertex-disjoint, separated paths.
///
/// Fails with [`TrellisError::BudgetExceeded`] when the pair transition count
/// exceeds `budget` and with [`TrellisError::Infeasible`] when no pair of
/// paths satisfies the constraints. Paths come back ordered by their own
/// weight, lightest first.
pub fn solve_two_paths_exact(g: &TrellisGraph, budget: u128) -> Result<TwoPathSolution, TrellisError> {
    let frames = g.frame_count();
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(g.layers().iter().map(|l| l.len() * l.len().saturating_sub(1) / 2).sum());
    let mut off = Vec::with_capacity(frames + 1);
    off.push(0);
    for t in 0..frames {
        push_feasible_pairs(g, t, &mut pairs);
        off.push(pairs.len());
    }
    let layer = |t: usize| &pairs[off[t]..off[t + 1]];
    let required: u128 = (1..frames).map(|t| layer(t - 1).len() as u128 * layer(t).len() as u128).sum();
    if required > budget {
        return Err(TrellisError::BudgetExceeded { required, budget });
    }
    if (0..frames).any(|t| layer(t).is_empty()) {
        return Err(TrellisError::Infeasible);
    }

    let mut cost = vec![f64::INFINITY; pairs.len()];
    let mut back = vec![Back { prev: u32::MAX, crossed: false }; pairs.len()];
    for (c, &(i, j)) in cost.iter_mut().zip(layer(0)) {
        *c = g.source_weight(i as usize) + g.source_weight(j as usize);
    }

    for t in 1..frames {
        let stage = &g.stages[t - 1];
        let (done, rest) = cost.split_at_mut(off[t]);
        let prev_cost = &done[off[t - 1]..];
        let next = &mut rest[..off[t + 1] - off[t]];
        let links = &mut back[off[t]..off[t + 1]];
        let here = layer(t);
        for (p, (&d, &(i, j))) in prev_cost.iter().zip(layer(t - 1)).enumerate() {
            if d == f64::INFINITY {
                continue;
            }
            let ri = &stage.cost[i as usize * stage.cols..(i as usize + 1) * stage.cols];
            let rj = &stage.cost[j as usize * stage.cols..(j as usize + 1) * stage.cols];
            for ((best, link), &(k, l)) in next.iter_mut().zip(links.iter_mut()).zip(here) {
                let (k, l) = (k as usize, l as usize);
                let straight = d + ri[k] + rj[l];
                let crossed = d + ri[l] + rj[k];
                if straight < *best {
                    *best = straight;
                    *link = Back { prev: p as u32, crossed: false };
                }
                if crossed < *best {
                    *best = crossed;
                    *link = Back { prev: p as u32, crossed: true };
                }
            }
        }
        let mut any = false;
        for ((c, link), &(k, l)) in next.iter_mut().zip(links.iter()).zip(here) {
            if link.prev != u32::MAX {
                *c += g.vertex_cost[t][k as usize] + g.vertex_cost[t][l as usize];
                any = true;
            }
        }
        if !any {
            return Err(TrellisError::Infeasible);
        }
    }

    let (mut state, best) = cost[off[frames - 1]..]
        .iter()
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |acc, (s, &d)| if d < acc.1 { (s, d) } else { acc });
    if !best.is_finite() {
        return Err(TrellisError::Infeasible);
    }

    let mut a = vec![0; frames];
    let mut b = vec![0; frames];
    let (k, l) = layer(frames - 1)[state];
    a[frames - 1] = k as usize;
    b[frames - 1] = l as usize;
    for t in (1..frames).rev() {
        let link = back[off[t] + state];
        let (i, j) = layer(t - 1)[link.prev as usize];
        let (k, _) = layer(t)[state];
        let a_from_k = a[t] == k as usize;
        // straight: i->k, j->l; crossed: j->k, i->l
        let (pa, pb) = match (link.crossed, a_from_k) {
            (false, true) | (true, false) => (i, j),
            (false, false) | (true, true) => (j, i),
        };
        a[t - 1] = pa as usize;
        b[t - 1] = pb as usize;
        state = link.prev as usize;
    }

    let (la, lb) = (path_log_odds(g, &a), path_log_odds(g, &b));
    let paths = if la > lb || (la == lb && a <= b) { [a, b] } else { [b, a] };
    Ok(finish_with(g, paths, true, la + lb))
}
