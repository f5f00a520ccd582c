//! Directed weighted graphs and the columns of their diffusion matrix.
//!
//! A [`Graph`] stores, for every node `j`, the non-zero entries of column `j`
//! of the transition matrix: the nodes reachable from `j`, each with
//! probability `edge weight / total outgoing weight of j`. Columns of nodes
//! without outgoing edges are empty (dangling nodes), so the matrix is
//! column-substochastic rather than stochastic.
//!
//! Graphs are immutable once built and safe to share across threads.
//! [`Graph::apply_delta`] produces a new graph plus the set of source columns
//! it had to renormalize; it never mutates in place.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Non-dangling columns sum to one within this tolerance.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Immutable directed weighted graph in compressed column form.
#[derive(Debug)]
pub struct Graph {
    n: usize,
    col_start: Vec<usize>,
    /// `(target, probability)` pairs, sorted by target within each column.
    entries: Vec<(u32, f64)>,
    /// Sum of raw edge weights per source node, kept so deltas can recover
    /// raw weights from stored probabilities.
    out_weight_sum: Vec<f64>,
    in_edges: OnceLock<InEdges>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            n: self.n,
            col_start: self.col_start.clone(),
            entries: self.entries.clone(),
            out_weight_sum: self.out_weight_sum.clone(),
            in_edges: OnceLock::new(),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.col_start == other.col_start
            && self.entries == other.entries
            && self.out_weight_sum == other.out_weight_sum
    }
}

/// Row (in-edge) view of the transition matrix, derived on demand from the
/// column structure and cached; pull solvers need it.
#[derive(Debug, Clone)]
pub struct InEdges {
    row_start: Vec<usize>,
    /// `(source, probability)` pairs, sorted by source within each row.
    entries: Vec<(u32, f64)>,
}

impl InEdges {
    /// Non-zero entries of row `i`: the in-neighbours of `i` with their
    /// transition probabilities.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.entries[self.row_start[i]..self.row_start[i + 1]]
    }
}

impl Graph {
    /// Builds a graph from raw weighted edges. Parallel edges are merged by
    /// summing their weights. `min_nodes` forces the node count to be at
    /// least that large; otherwise `n` is one past the largest id seen.
    pub fn from_weighted_edges<I>(min_nodes: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut max_id: usize = 0;
        let mut any = false;
        for (src, dst, w) in edges {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Delta(format!(
                    "edge {src} -> {dst} has weight {w}; weights must be positive"
                )));
            }
            let limit = u32::MAX as usize;
            if src >= limit || dst >= limit {
                return Err(Error::Delta(format!(
                    "edge {src} -> {dst}: node ids above {limit} are not supported"
                )));
            }
            any = true;
            max_id = max_id.max(src).max(dst);
            *merged.entry((src as u32, dst as u32)).or_insert(0.0) += w;
        }
        let n = min_nodes.max(if any { max_id + 1 } else { 0 });
        Ok(Self::from_merged(n, &merged))
    }

    fn from_merged(n: usize, merged: &BTreeMap<(u32, u32), f64>) -> Graph {
        let mut out_weight_sum = vec![0.0f64; n];
        let mut degree = vec![0usize; n];
        for (&(s, _), &w) in merged {
            out_weight_sum[s as usize] += w;
            degree[s as usize] += 1;
        }
        let mut col_start = Vec::with_capacity(n + 1);
        col_start.push(0usize);
        for j in 0..n {
            col_start.push(col_start[j] + degree[j]);
        }
        let mut entries = Vec::with_capacity(merged.len());
        for (&(s, t), &w) in merged {
            entries.push((t, w / out_weight_sum[s as usize]));
        }
        Graph {
            n,
            col_start,
            entries,
            out_weight_sum,
            in_edges: OnceLock::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.entries.len()
    }

    /// Column `j` of the transition matrix: the out-neighbours of `j` with
    /// their probabilities, sorted by target. Empty exactly when `j` is
    /// dangling.
    pub fn transitions(&self, j: usize) -> Result<&[(u32, f64)]> {
        if j >= self.n {
            return Err(Error::NodeOutOfRange { node: j, n: self.n });
        }
        Ok(self.column(j))
    }

    #[inline]
    pub(crate) fn column(&self, j: usize) -> &[(u32, f64)] {
        &self.entries[self.col_start[j]..self.col_start[j + 1]]
    }

    /// True iff node `j` has no outgoing edge. Panics when `j` is out of
    /// range; use [`Graph::transitions`] for a checked access.
    pub fn is_dangling(&self, j: usize) -> bool {
        self.col_start[j] == self.col_start[j + 1]
    }

    pub fn dangling_count(&self) -> usize {
        (0..self.n).filter(|&j| self.is_dangling(j)).count()
    }

    /// Sum of raw outgoing edge weights of node `j` (zero for dangling nodes).
    pub fn out_weight_sum(&self, j: usize) -> f64 {
        self.out_weight_sum[j]
    }

    /// Row view of the matrix, built on first use and cached.
    pub fn in_edges(&self) -> &InEdges {
        self.in_edges.get_or_init(|| {
            let mut indegree = vec![0usize; self.n];
            for &(t, _) in &self.entries {
                indegree[t as usize] += 1;
            }
            let mut row_start = Vec::with_capacity(self.n + 1);
            row_start.push(0usize);
            for i in 0..self.n {
                row_start.push(row_start[i] + indegree[i]);
            }
            let mut cursor = row_start.clone();
            let mut entries = vec![(0u32, 0.0f64); self.entries.len()];
            // Columns are visited in ascending source order, so each row ends
            // up sorted by source without an explicit sort.
            for j in 0..self.n {
                for &(t, p) in self.column(j) {
                    entries[cursor[t as usize]] = (j as u32, p);
                    cursor[t as usize] += 1;
                }
            }
            InEdges { row_start, entries }
        })
    }

    /// Applies a delta, returning the updated graph and the set of source
    /// columns whose probabilities were renormalized.
    pub fn apply_delta(&self, delta: &GraphDelta) -> Result<(Graph, BTreeSet<usize>)> {
        // A (source, target) pair may appear at most once across the delta.
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(s, t, w) in &delta.additions {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Delta(format!(
                    "addition {s} -> {t} has weight {w}; weights must be positive"
                )));
            }
            if !seen.insert((s, t)) {
                return Err(Error::Delta(format!("edge {s} -> {t} appears twice in the delta")));
            }
        }
        for &(s, t) in &delta.removals {
            if !seen.insert((s, t)) {
                return Err(Error::Delta(format!("edge {s} -> {t} appears twice in the delta")));
            }
        }

        let mut changed: BTreeSet<usize> = BTreeSet::new();
        let mut n_new = self.n;
        for &(s, t, _) in &delta.additions {
            changed.insert(s);
            n_new = n_new.max(s + 1).max(t + 1);
        }
        for &(s, t) in &delta.removals {
            if s >= self.n || t >= self.n {
                return Err(Error::Delta(format!("removal of absent edge {s} -> {t}")));
            }
            changed.insert(s);
        }
        if changed.is_empty() {
            return Ok((self.clone(), changed));
        }
        if n_new >= u32::MAX as usize {
            return Err(Error::Delta(format!(
                "delta grows the graph beyond the supported {} nodes",
                u32::MAX
            )));
        }

        // Raw weights of a touched column, recovered from stored
        // probabilities; untouched columns are copied verbatim.
        let mut patched: BTreeMap<usize, BTreeMap<u32, f64>> = BTreeMap::new();
        for &j in &changed {
            let mut weights = BTreeMap::new();
            if j < self.n {
                let sum = self.out_weight_sum[j];
                for &(t, p) in self.column(j) {
                    weights.insert(t, p * sum);
                }
            }
            patched.insert(j, weights);
        }
        for &(s, t) in &delta.removals {
            let col = patched.get_mut(&s).expect("removal source is in changed set");
            if col.remove(&(t as u32)).is_none() {
                return Err(Error::Delta(format!("removal of absent edge {s} -> {t}")));
            }
        }
        for &(s, t, w) in &delta.additions {
            let col = patched.get_mut(&s).expect("addition source is in changed set");
            *col.entry(t as u32).or_insert(0.0) += w;
        }

        let mut col_start = Vec::with_capacity(n_new + 1);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(self.entries.len());
        let mut out_weight_sum = vec![0.0f64; n_new];
        col_start.push(0usize);
        for j in 0..n_new {
            if let Some(weights) = patched.get(&j) {
                let sum: f64 = weights.values().sum();
                out_weight_sum[j] = sum;
                for (&t, &w) in weights {
                    entries.push((t, w / sum));
                }
            } else if j < self.n {
                out_weight_sum[j] = self.out_weight_sum[j];
                entries.extend_from_slice(self.column(j));
            }
            col_start.push(entries.len());
        }
        let graph = Graph {
            n: n_new,
            col_start,
            entries,
            out_weight_sum,
            in_edges: OnceLock::new(),
        };
        Ok((graph, changed))
    }
}

/// An edge-set difference to apply to a graph: weighted additions and
/// removals of existing edges.
#[derive(Debug, Clone, Default)]
pub struct GraphDelta {
    pub additions: Vec<(usize, usize, f64)>,
    pub removals: Vec<(usize, usize)>,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.additions.is_empty() && self.removals.is_empty()
    }
}

fn parse_node_id(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<u64>()
        .ok()
        .and_then(|v| usize::try_from(v).ok())
        .filter(|&v| v < u32::MAX as usize)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("invalid node id {tok:?}"),
        })
}

fn parse_weight(tok: &str, line: usize) -> Result<f64> {
    let w: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid weight {tok:?}"),
    })?;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("weight must be positive, got {tok}"),
        });
    }
    Ok(w)
}

fn skip_line(s: &str) -> bool {
    let t = s.trim_start();
    t.is_empty() || t.starts_with('#')
}

/// Reads a whitespace-separated edge list, one `src dst [weight]` triple per
/// line. Lines starting with `#` and blank lines are ignored; the default
/// weight is 1. The node count is one past the largest id seen, or
/// `min_nodes` if larger.
pub fn load_edge_list<R: BufRead>(reader: R, min_nodes: usize) -> Result<Graph> {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if skip_line(&line) {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'src dst [weight]', got {} tokens", toks.len()),
            });
        }
        let src = parse_node_id(toks[0], lineno)?;
        let dst = parse_node_id(toks[1], lineno)?;
        let w = if toks.len() == 3 { parse_weight(toks[2], lineno)? } else { 1.0 };
        edges.push((src, dst, w));
    }
    Graph::from_weighted_edges(min_nodes, edges)
}

/// Reads a delta file: lines `+ src dst [weight]` add an edge, lines
/// `- src dst` remove one. Lexical rules match the edge-list format.
pub fn parse_delta<R: BufRead>(reader: R) -> Result<GraphDelta> {
    let mut delta = GraphDelta::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if skip_line(&line) {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("+") if toks.len() == 3 || toks.len() == 4 => {
                let src = parse_node_id(toks[1], lineno)?;
                let dst = parse_node_id(toks[2], lineno)?;
                let w = if toks.len() == 4 { parse_weight(toks[3], lineno)? } else { 1.0 };
                delta.additions.push((src, dst, w));
            }
            Some("-") if toks.len() == 3 => {
                let src = parse_node_id(toks[1], lineno)?;
                let dst = parse_node_id(toks[2], lineno)?;
                delta.removals.push((src, dst));
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected '+ src dst [weight]' or '- src dst'".into(),
                });
            }
        }
    }
    Ok(delta)
}
