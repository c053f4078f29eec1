//! Integer flow view of a two-path solution and its constraint checker.

use std::fmt;

use super::{TrellisGraph, TwoPathSolution};

/// Node of the flow network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowNode {
    Source,
    Target,
    Vertex { t: usize, k: usize },
}

impl fmt::Display for FlowNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowNode::Source => write!(f, "src"),
            FlowNode::Target => write!(f, "trg"),
            FlowNode::Vertex { t, k } => write!(f, "v[{t},{k}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    /// Inflow equals outflow at every trellis vertex.
    Conservation,
    /// Outflow of every vertex is at most 1.
    Capacity,
    /// Every edge flow is 0 or more.
    Nonnegativity,
    /// Exactly two units leave the source and reach the target.
    TwoUnitFlow,
    /// A used vertex shares its layer with no used vertex of its
    /// exclusion set.
    Separation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub node: FlowNode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn family(&self, family: ConstraintFamily) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.family == family)
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{:?} at {}: {}", v.family, v.node, v.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Integer edge flows. `inner[t]` is row-major over layers `t` and `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub source: Vec<i64>,
    pub inner: Vec<Vec<i64>>,
    pub target: Vec<i64>,
    /// Path steps that do not correspond to an edge of the graph.
    pub dangling: Vec<(FlowNode, String)>,
}

impl FlowAssignment {
    pub fn zeros(g: &TrellisGraph) -> Self {
        let frames = g.frame_count();
        Self {
            source: vec![0; g.layer(0).len()],
            inner: (0..frames - 1).map(|t| vec![0; g.layer(t).len() * g.layer(t + 1).len()]).collect(),
            target: vec![0; g.layer(frames - 1).len()],
            dangling: Vec::new(),
        }
    }

    /// Pushes one unit along each path.
    pub fn from_solution(g: &TrellisGraph, sol: &TwoPathSolution) -> Self {
        let mut flow = Self::zeros(g);
        let frames = g.frame_count();
        for path in &sol.paths {
            if path.len() != frames {
                flow.dangling.push((FlowNode::Source, format!("path has {} layers, trellis {frames}", path.len())));
                continue;
            }
            if let Some(k) = path.iter().enumerate().find(|&(t, &k)| k >= g.layer(t).len()) {
                flow.dangling.push((FlowNode::Vertex { t: k.0, k: *k.1 }, "no such vertex".into()));
                continue;
            }
            flow.source[path[0]] += 1;
            flow.target[path[frames - 1]] += 1;
            for t in 0..frames - 1 {
                let (i, j) = (path[t], path[t + 1]);
                if g.transition(t, i, j).is_none() {
                    flow.dangling.push((FlowNode::Vertex { t, k: i }, format!("no edge to v[{},{j}]", t + 1)));
                }
                flow.inner[t][i * g.layer(t + 1).len() + j] += 1;
            }
        }
        flow
    }

    fn outflow(&self, g: &TrellisGraph, t: usize, k: usize) -> i64 {
        if t + 1 == g.frame_count() {
            self.target[k]
        } else {
            let w = g.layer(t + 1).len();
            self.inner[t][k * w..(k + 1) * w].iter().sum()
        }
    }

    fn inflow(&self, g: &TrellisGraph, t: usize, k: usize) -> i64 {
        if t == 0 {
            self.source[k]
        } else {
            let w = g.layer(t).len();
            (0..g.layer(t - 1).len()).map(|i| self.inner[t - 1][i * w + k]).sum()
        }
    }
}

/// Checks every constraint family of the two-path integer program.
pub fn check_flows(g: &TrellisGraph, flow: &FlowAssignment) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    let mut push = |family, node, detail: String| report.violations.push(Violation { family, node, detail });

    for (node, why) in &flow.dangling {
        push(ConstraintFamily::Conservation, *node, why.clone());
    }
    for (k, &f) in flow.source.iter().enumerate() {
        if f < 0 {
            push(ConstraintFamily::Nonnegativity, FlowNode::Source, format!("flow {f} to v[0,{k}]"));
        }
    }
    for (k, &f) in flow.target.iter().enumerate() {
        let t = g.frame_count() - 1;
        if f < 0 {
            push(ConstraintFamily::Nonnegativity, FlowNode::Vertex { t, k }, format!("flow {f} to trg"));
        }
    }
    for (t, stage) in flow.inner.iter().enumerate() {
        let w = g.layer(t + 1).len();
        for (e, &f) in stage.iter().enumerate() {
            if f < 0 {
                push(
                    ConstraintFamily::Nonnegativity,
                    FlowNode::Vertex { t, k: e / w },
                    format!("flow {f} to v[{},{}]", t + 1, e % w),
                );
            }
        }
    }

    let src: i64 = flow.source.iter().sum();
    if src != 2 {
        push(ConstraintFamily::TwoUnitFlow, FlowNode::Source, format!("{src} units leave"));
    }
    let trg: i64 = flow.target.iter().sum();
    if trg != 2 {
        push(ConstraintFamily::TwoUnitFlow, FlowNode::Target, format!("{trg} units arrive"));
    }

    for t in 0..g.frame_count() {
        let out: Vec<i64> = (0..g.layer(t).len()).map(|k| flow.outflow(g, t, k)).collect();
        for (k, &o) in out.iter().enumerate() {
            let node = FlowNode::Vertex { t, k };
            let i = flow.inflow(g, t, k);
            if i != o {
                push(ConstraintFamily::Conservation, node, format!("in {i}, out {o}"));
            }
            if o > 1 {
                push(ConstraintFamily::Capacity, node, format!("out {o}"));
            }
            let near: i64 = g.exclusion(t, k).iter().map(|&m| out[m]).sum();
            if o > 0 && near > 0 {
                push(ConstraintFamily::Separation, node, format!("out {o}, exclusion set {near}"));
            }
        }
    }
    report
}

/// [`check_flows`] on the flow induced by the solution's paths.
pub fn check_flow_constraints(g: &TrellisGraph, sol: &TwoPathSolution) -> ConstraintReport {
    check_flows(g, &FlowAssignment::from_solution(g, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barcode::{TransitionPrior, VertexPrior};
    use crate::geometry::Pt2;
    use crate::trellis::random::{random_trellis, RandomTrellisSpec};
    use crate::trellis::{solve_two_paths, solve_two_paths_exact, TrellisVertex, DEFAULT_EXACT_BUDGET};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_graph(xs: &[f64], frames: usize) -> TrellisGraph {
        let layers: Vec<Vec<_>> = (0..frames)
            .map(|t| {
                xs.iter()
                    .enumerate()
                    .map(|(k, &x)| TrellisVertex {
                        t,
                        left: k,
                        right: k,
                        position_pair: (Pt2::new(x, 0.0), Pt2::new(x, 0.0)),
                        prior: VertexPrior::new(0.7),
                    })
                    .collect()
            })
            .collect();
        let n = xs.len();
        let tr = (0..frames - 1).map(|_| vec![Some(TransitionPrior::new(0.5)); n * n]).collect();
        TrellisGraph::from_parts(layers, tr, 15.0).unwrap()
    }

    fn sol(a: Vec<usize>, b: Vec<usize>) -> TwoPathSolution {
        TwoPathSolution { paths: [a, b], objective: 0.0, exact: false, degenerate_risk: false }
    }

    #[test]
    fn shared_vertex_breaks_capacity() {
        let g = line_graph(&[0.0, 50.0, 100.0], 3);
        let r = check_flow_constraints(&g, &sol(vec![0, 1, 2], vec![2, 1, 0]));
        let cap: Vec<_> = r.family(ConstraintFamily::Capacity).collect();
        assert_eq!(cap.len(), 1);
        assert_eq!(cap[0].node, FlowNode::Vertex { t: 1, k: 1 });
    }

    #[test]
    fn close_vertices_break_separation() {
        let g = line_graph(&[0.0, 10.0, 100.0], 2);
        let r = check_flow_constraints(&g, &sol(vec![0, 0], vec![1, 2]));
        let sep: Vec<_> = r.family(ConstraintFamily::Separation).map(|v| v.node).collect();
        assert_eq!(sep, vec![FlowNode::Vertex { t: 0, k: 0 }, FlowNode::Vertex { t: 0, k: 1 }]);
        assert!(check_flow_constraints(&g, &sol(vec![0, 0], vec![2, 2])).is_feasible());
    }

    #[test]
    fn hand_built_flows_hit_each_family() {
        let g = line_graph(&[0.0, 50.0], 2);
        let mut f = FlowAssignment::zeros(&g);
        f.source = vec![1, 0];
        f.target = vec![1, 0];
        f.inner[0] = vec![1, 0, 0, 0];
        let r = check_flows(&g, &f);
        assert_eq!(r.family(ConstraintFamily::TwoUnitFlow).count(), 2);
        assert_eq!(r.family(ConstraintFamily::Conservation).count(), 0);

        f.source = vec![1, 1];
        f.target = vec![1, 1];
        f.inner[0] = vec![1, -1, 0, 1];
        let r = check_flows(&g, &f);
        assert_eq!(r.family(ConstraintFamily::Nonnegativity).count(), 1);
        assert!(r.family(ConstraintFamily::Conservation).count() > 0);
    }

    #[test]
    fn missing_edge_is_reported() {
        let mut g = line_graph(&[0.0, 50.0], 2);
        g.stages[0].transition[1] = None;
        g.stages[0].cost[1] = f64::INFINITY;
        let r = check_flow_constraints(&g, &sol(vec![0, 1], vec![1, 0]));
        assert!(!r.is_feasible());
        assert!(r.summary().contains("no edge"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solver_outputs_are_feasible(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_trellis(&RandomTrellisSpec::default(), &mut rng);
            if let Ok(s) = solve_two_paths(&g) {
                let r = check_flow_constraints(&g, &s);
                prop_assert!(r.is_feasible(), "{}", r.summary());
            }
            if let Ok(s) = solve_two_paths_exact(&g, DEFAULT_EXACT_BUDGET) {
                let r = check_flow_constraints(&g, &s);
                prop_assert!(r.is_feasible(), "{}", r.summary());
            }
        }
    }
}
