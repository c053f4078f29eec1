//! Line-oriented text dump of a trellis.
//!
//! ```text
//! trellis v1
//! separation <C>
//! layer <t> <n>
//! vertex <t> <k> <left> <right> <x> <y> <x'> <y'> <prior>
//! edge <t> <i> <j> <p_transition> <weight>
//! ```
//!
//! Source and target edges are implied. Exclusion sets and weights are
//! recomputed on load; the `weight` column is informational.

use std::io::{self, BufRead, Write};

use super::{TrellisError, TrellisGraph, TrellisVertex};
use crate::barcode::{TransitionPrior, VertexPrior};
use crate::geometry::Pt2;

const HEADER: &str = "trellis v1";

impl TrellisGraph {
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{HEADER}")?;
        writeln!(out, "separation {}", self.separation)?;
        for (t, layer) in self.layers.iter().enumerate() {
            writeln!(out, "layer {t} {}", layer.len())?;
            for (k, v) in layer.iter().enumerate() {
                let (a, b) = v.position_pair;
                writeln!(
                    out,
                    "vertex {t} {k} {} {} {} {} {} {} {}",
                    v.left,
                    v.right,
                    a.x,
                    a.y,
                    b.x,
                    b.y,
                    v.prior.value()
                )?;
            }
        }
        for t in 0..self.stages.len() {
            for i in 0..self.layers[t].len() {
                for j in 0..self.layers[t + 1].len() {
                    if let (Some(p), Some(w)) = (self.transition(t, i, j), self.edge_weight(t, i, j)) {
                        writeln!(out, "edge {t} {i} {j} {} {w}", p.value())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, TrellisError> {
        let mut separation = None;
        let mut widths: Vec<usize> = Vec::new();
        let mut layers: Vec<Vec<Option<TrellisVertex>>> = Vec::new();
        let mut edges: Vec<(usize, usize, usize, f64)> = Vec::new();
        let mut seen_header = false;

        for (n, line) in input.lines().enumerate() {
            let lineno = n + 1;
            let bad = |msg: String| TrellisError::Malformed { line: lineno, msg };
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line != HEADER {
                    return Err(bad(format!("expected '{HEADER}'")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, TrellisError> {
                fields
                    .get(i)
                    .ok_or_else(|| bad(format!("missing field {i}")))?
                    .parse::<f64>()
                    .map_err(|e| bad(format!("field {i}: {e}")))
            };
            let idx = |i: usize| -> Result<usize, TrellisError> {
                fields
                    .get(i)
                    .ok_or_else(|| bad(format!("missing field {i}")))?
                    .parse::<usize>()
                    .map_err(|e| bad(format!("field {i}: {e}")))
            };
            match fields[0] {
                "separation" => separation = Some(num(1)?),
                "layer" => {
                    let (t, w) = (idx(1)?, idx(2)?);
                    if t != widths.len() {
                        return Err(bad(format!("layer {t} out of order")));
                    }
                    widths.push(w);
                    layers.push(vec![None; w]);
                }
                "vertex" => {
                    let (t, k) = (idx(1)?, idx(2)?);
                    let slot = layers
                        .get_mut(t)
                        .and_then(|l| l.get_mut(k))
                        .ok_or_else(|| bad(format!("vertex {t} {k} outside declared layers")))?;
                    let p = num(9)?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(bad(format!("prior {p} outside [0, 1]")));
                    }
                    *slot = Some(TrellisVertex {
                        t,
                        left: idx(3)?,
                        right: idx(4)?,
                        position_pair: (Pt2::new(num(5)?, num(6)?), Pt2::new(num(7)?, num(8)?)),
                        prior: VertexPrior::new(p),
                    });
                }
                "edge" => edges.push((idx(1)?, idx(2)?, idx(3)?, num(4)?)),
                other => return Err(bad(format!("unknown record '{other}'"))),
            }
        }

        let eof = |msg: String| TrellisError::Malformed { line: 0, msg };
        if !seen_header {
            return Err(eof("empty input".into()));
        }
        let separation = separation.ok_or(eof("no separation record".into()))?;
        let layers: Vec<Vec<TrellisVertex>> = layers
            .into_iter()
            .enumerate()
            .map(|(t, l)| {
                l.into_iter().enumerate().map(|(k, v)| {
                    v.ok_or_else(|| eof(format!("vertex {t} {k} missing")))
                }).collect()
            })
            .collect::<Result<_, _>>()?;
        let mut transitions: Vec<Vec<Option<TransitionPrior>>> =
            (1..widths.len()).map(|t| vec![None; widths[t - 1] * widths[t]]).collect();
        for (t, i, j, p) in edges {
            if t + 1 >= widths.len() || i >= widths[t] || j >= widths[t + 1] {
                return Err(eof(format!("edge {t} {i} {j} out of range")));
            }
            transitions[t][i * widths[t + 1] + j] = Some(TransitionPrior::new(p));
        }
        TrellisGraph::from_parts(layers, transitions, separation)
    }
}
