//! The dynamic graph: the mutable ground truth every engine tracks.
//!
//! Node ids are 1-based and always contiguous (`1..=n`). A node deletion is
//! carried out as "swap the node with the last one, then drop the last
//! node", and the swap is reported back as a [`Transposition`] so that
//! observation vectors and embedding states can follow along.
//!
//! Text formats:
//!
//! ```text
//! graph <n> <directed|undirected>
//! edge <i> <j> <w>
//! ```
//!
//! and, for operation streams, one op per line:
//!
//! ```text
//! ei i j w        edge insert
//! ed i j          edge delete
//! wc i j w        weight change (new absolute weight)
//! ni k i1 w1 ... ik wk [obs]
//! nd i            node delete
//! ```
//!
//! In `ni`, the new node gets id `n + 1`; a neighbour id may be `n + 1`
//! itself for a self-loop. On directed graphs a plain id `i` is an edge
//! from the new node to `i`, and `-i` is an edge from `i` to the new node.
//! The optional trailing `obs` is the observed value for the new node.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::text::Lines;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    EdgeInsert,
    EdgeDelete,
    WeightChange,
    NodeInsert,
    NodeDelete,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::EdgeInsert,
        OpKind::EdgeDelete,
        OpKind::WeightChange,
        OpKind::NodeInsert,
        OpKind::NodeDelete,
    ];

    pub fn is_edge_op(self) -> bool {
        matches!(
            self,
            OpKind::EdgeInsert | OpKind::EdgeDelete | OpKind::WeightChange
        )
    }

    /// Short name used by the operation stream format.
    pub fn code(self) -> &'static str {
        match self {
            OpKind::EdgeInsert => "ei",
            OpKind::EdgeDelete => "ed",
            OpKind::WeightChange => "wc",
            OpKind::NodeInsert => "ni",
            OpKind::NodeDelete => "nd",
        }
    }

    pub fn from_code(code: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDirection {
    /// From the new node to the neighbour.
    Out,
    /// From the neighbour to the new node.
    In,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentEdge {
    pub neighbor: usize,
    pub weight: f64,
    pub direction: EdgeDirection,
}

impl IncidentEdge {
    pub fn out(neighbor: usize, weight: f64) -> Self {
        IncidentEdge {
            neighbor,
            weight,
            direction: EdgeDirection::Out,
        }
    }

    pub fn incoming(neighbor: usize, weight: f64) -> Self {
        IncidentEdge {
            neighbor,
            weight,
            direction: EdgeDirection::In,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphUpdate {
    EdgeInsert {
        i: usize,
        j: usize,
        w: f64,
    },
    EdgeDelete {
        i: usize,
        j: usize,
    },
    WeightChange {
        i: usize,
        j: usize,
        w: f64,
    },
    /// Adds node `n + 1` together with its incident edges.
    NodeInsert {
        edges: Vec<IncidentEdge>,
    },
    NodeDelete {
        i: usize,
    },
}

impl GraphUpdate {
    pub fn kind(&self) -> OpKind {
        match self {
            GraphUpdate::EdgeInsert { .. } => OpKind::EdgeInsert,
            GraphUpdate::EdgeDelete { .. } => OpKind::EdgeDelete,
            GraphUpdate::WeightChange { .. } => OpKind::WeightChange,
            GraphUpdate::NodeInsert { .. } => OpKind::NodeInsert,
            GraphUpdate::NodeDelete { .. } => OpKind::NodeDelete,
        }
    }
}

impl fmt::Display for GraphUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphUpdate::EdgeInsert { i, j, w } => write!(f, "ei {i} {j} {w}"),
            GraphUpdate::EdgeDelete { i, j } => write!(f, "ed {i} {j}"),
            GraphUpdate::WeightChange { i, j, w } => write!(f, "wc {i} {j} {w}"),
            GraphUpdate::NodeInsert { edges } => {
                write!(f, "ni {}", edges.len())?;
                for e in edges {
                    match e.direction {
                        EdgeDirection::Out => write!(f, " {} {}", e.neighbor, e.weight)?,
                        EdgeDirection::In => write!(f, " -{} {}", e.neighbor, e.weight)?,
                    }
                }
                Ok(())
            }
            GraphUpdate::NodeDelete { i } => write!(f, "nd {i}"),
        }
    }
}

/// Exchange of two node ids (1-based). `a == b` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transposition {
    pub a: usize,
    pub b: usize,
}

impl Transposition {
    pub fn is_identity(&self) -> bool {
        self.a == self.b
    }

    pub fn apply(&self, id: usize) -> usize {
        if id == self.a {
            self.b
        } else if id == self.b {
            self.a
        } else {
            id
        }
    }

    /// Swaps the two positions of a slice indexed by node id.
    pub fn permute_slice<T>(&self, values: &mut [T]) {
        values.swap(self.a - 1, self.b - 1);
    }
}

pub(crate) fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w != 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(w))
    }
}

/// Node set `1..=n` with a weighted edge map.
///
/// Undirected graphs store both orientations of every edge with equal
/// weight; a weight of zero is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    directed: bool,
    out: Vec<BTreeMap<usize, f64>>,
    inc: Vec<BTreeMap<usize, f64>>,
}

impl DynamicGraph {
    pub fn new(n: usize, directed: bool) -> Self {
        DynamicGraph {
            directed,
            out: vec![BTreeMap::new(); n],
            inc: vec![BTreeMap::new(); n],
        }
    }

    /// Builds a graph from `(i, j, w)` triples, rejecting duplicates.
    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = DynamicGraph::new(n, directed);
        for &(i, j, w) in edges {
            g.apply_update(&GraphUpdate::EdgeInsert { i, j, w })?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.out.get(i.wrapping_sub(1))?.get(&j).copied()
    }

    /// Edges leaving `i` as `(target, weight)`.
    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.out[i - 1].iter().map(|(&j, &w)| (j, w))
    }

    /// Edges entering `i` as `(source, weight)`.
    pub fn in_edges(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.inc[i - 1].iter().map(|(&j, &w)| (j, w))
    }

    /// Every stored ordered pair `(i, j, w)`; undirected edges appear twice.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(&j, &w)| (i + 1, j, w)))
    }

    /// Edges with each undirected edge listed once (`i <= j`).
    pub fn canonical_edges(&self) -> Vec<(usize, usize, f64)> {
        self.edges()
            .filter(|&(i, j, _)| self.directed || i <= j)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.canonical_edges().len()
    }

    /// Sum of the weights of edges leaving `i`.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.out[i - 1].values().sum()
    }

    /// Number of distinct nodes adjacent to `i` in either direction.
    pub fn neighbor_count(&self, i: usize) -> usize {
        let mut ids: Vec<usize> = self.out[i - 1].keys().copied().collect();
        ids.extend(self.inc[i - 1].keys().copied());
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn has_self_loops(&self) -> bool {
        self.out
            .iter()
            .enumerate()
            .any(|(i, row)| row.contains_key(&(i + 1)))
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= 1 && i <= self.n() {
            Ok(())
        } else {
            Err(Error::UpdateConflict(format!(
                "node {i} out of range 1..={}",
                self.n()
            )))
        }
    }

    fn set_raw(&mut self, i: usize, j: usize, w: f64) {
        self.out[i - 1].insert(j, w);
        self.inc[j - 1].insert(i, w);
        if !self.directed {
            self.out[j - 1].insert(i, w);
            self.inc[i - 1].insert(j, w);
        }
    }

    fn remove_raw(&mut self, i: usize, j: usize) {
        self.out[i - 1].remove(&j);
        self.inc[j - 1].remove(&i);
        if !self.directed {
            self.out[j - 1].remove(&i);
            self.inc[i - 1].remove(&j);
        }
    }

    /// Checks `u` against the current graph without changing it.
    pub fn check_update(&self, u: &GraphUpdate) -> Result<()> {
        match *u {
            GraphUpdate::EdgeInsert { i, j, w } => {
                self.check_node(i)?;
                self.check_node(j)?;
                check_weight(w)?;
                if self.weight(i, j).is_some() {
                    return Err(Error::UpdateConflict(format!(
                        "edge ({i}, {j}) already exists"
                    )));
                }
            }
            GraphUpdate::EdgeDelete { i, j } => {
                self.check_node(i)?;
                self.check_node(j)?;
                if self.weight(i, j).is_none() {
                    return Err(Error::UpdateConflict(format!(
                        "edge ({i}, {j}) does not exist"
                    )));
                }
            }
            GraphUpdate::WeightChange { i, j, w } => {
                self.check_node(i)?;
                self.check_node(j)?;
                check_weight(w)?;
                if self.weight(i, j).is_none() {
                    return Err(Error::UpdateConflict(format!(
                        "edge ({i}, {j}) does not exist"
                    )));
                }
            }
            GraphUpdate::NodeInsert { ref edges } => {
                let new_id = self.n() + 1;
                let mut seen = Vec::with_capacity(edges.len());
                for e in edges {
                    check_weight(e.weight)?;
                    if e.neighbor < 1 || e.neighbor > new_id {
                        return Err(Error::UpdateConflict(format!(
                            "incident node {} out of range 1..={new_id}",
                            e.neighbor
                        )));
                    }
                    if !self.directed && e.direction == EdgeDirection::In {
                        return Err(Error::UpdateConflict(
                            "incoming-edge marker on an undirected graph".into(),
                        ));
                    }
                    // a self-loop has no orientation
                    let key = if e.neighbor == new_id || !self.directed {
                        (e.neighbor, EdgeDirection::Out)
                    } else {
                        (e.neighbor, e.direction)
                    };
                    if seen.contains(&key) {
                        return Err(Error::UpdateConflict(format!(
                            "duplicate incident edge to node {}",
                            e.neighbor
                        )));
                    }
                    seen.push(key);
                }
            }
            GraphUpdate::NodeDelete { i } => self.check_node(i)?,
        }
        Ok(())
    }

    /// Applies a validated update. For node deletions the transposition
    /// used to move the node to the last position is returned.
    pub fn apply_update(&mut self, u: &GraphUpdate) -> Result<Option<Transposition>> {
        self.check_update(u)?;
        match *u {
            GraphUpdate::EdgeInsert { i, j, w } | GraphUpdate::WeightChange { i, j, w } => {
                self.set_raw(i, j, w);
            }
            GraphUpdate::EdgeDelete { i, j } => self.remove_raw(i, j),
            GraphUpdate::NodeInsert { ref edges } => {
                self.out.push(BTreeMap::new());
                self.inc.push(BTreeMap::new());
                let id = self.n();
                for e in edges {
                    match e.direction {
                        EdgeDirection::Out => self.set_raw(id, e.neighbor, e.weight),
                        EdgeDirection::In => self.set_raw(e.neighbor, id, e.weight),
                    }
                }
            }
            GraphUpdate::NodeDelete { i } => {
                let t = self.permute_with_last(i)?;
                self.remove_last();
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    fn remove_last(&mut self) {
        let last = self.n();
        let out: Vec<usize> = self.out[last - 1].keys().copied().collect();
        let inc: Vec<usize> = self.inc[last - 1].keys().copied().collect();
        for j in out {
            self.inc[j - 1].remove(&last);
        }
        for j in inc {
            self.out[j - 1].remove(&last);
        }
        self.out.pop();
        self.inc.pop();
    }

    /// Exchanges the ids of node `i` and node `n`.
    pub fn permute_with_last(&mut self, i: usize) -> Result<Transposition> {
        self.check_node(i)?;
        let t = Transposition { a: i, b: self.n() };
        if t.is_identity() {
            return Ok(t);
        }
        let mut touched: Vec<(usize, usize, f64)> = Vec::new();
        for node in [t.a, t.b] {
            touched.extend(self.out_edges(node).map(|(j, w)| (node, j, w)));
            touched.extend(self.in_edges(node).map(|(j, w)| (j, node, w)));
        }
        touched.sort_by_key(|e| (e.0, e.1));
        touched.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        for &(a, b, _) in &touched {
            self.out[a - 1].remove(&b);
            self.inc[b - 1].remove(&a);
        }
        for &(a, b, w) in &touched {
            let (a, b) = (t.apply(a), t.apply(b));
            self.out[a - 1].insert(b, w);
            self.inc[b - 1].insert(a, w);
        }
        Ok(t)
    }

    /// Checks every structural invariant of the graph.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.inc.len() != n {
            return Err(Error::Verification("in/out tables differ in length".into()));
        }
        for (i, j, w) in self.edges() {
            if j < 1 || j > n {
                return Err(Error::Verification(format!(
                    "edge ({i}, {j}) leaves the node range"
                )));
            }
            if !(w.is_finite() && w != 0.0) {
                return Err(Error::Verification(format!(
                    "edge ({i}, {j}) has weight {w}"
                )));
            }
            if self.inc[j - 1].get(&i) != Some(&w) {
                return Err(Error::Verification(format!(
                    "edge ({i}, {j}) missing from in-table"
                )));
            }
            if !self.directed && self.weight(j, i) != Some(w) {
                return Err(Error::Verification(format!(
                    "edge ({i}, {j}) is not symmetric"
                )));
            }
        }
        let in_total: usize = self.inc.iter().map(BTreeMap::len).sum();
        let out_total: usize = self.out.iter().map(BTreeMap::len).sum();
        if in_total != out_total {
            return Err(Error::Verification("in-table has stray entries".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = if self.directed {
            "directed"
        } else {
            "undirected"
        };
        let _ = writeln!(s, "graph {} {kind}", self.n());
        for (i, j, w) in self.canonical_edges() {
            let _ = writeln!(s, "edge {i} {j} {w}");
        }
        s
    }

    pub fn parse(src: &str) -> Result<Self> {
        Self::read(&mut Lines::new(src))
    }

    /// Reads a graph from the remaining lines; every line after the header
    /// must be an edge.
    pub fn read(lines: &mut Lines<'_>) -> Result<Self> {
        let header = lines.require("graph header")?;
        header.expect_keyword("graph")?;
        header.expect_len(3)?;
        let n: usize = header.field(1)?;
        let directed = match header.tokens[2] {
            "directed" => true,
            "undirected" => false,
            other => {
                return Err(Error::parse(
                    header.number,
                    format!("expected `directed` or `undirected`, found `{other}`"),
                ))
            }
        };
        let mut g = DynamicGraph::new(n, directed);
        for line in lines.by_ref() {
            line.expect_keyword("edge")?;
            line.expect_len(4)?;
            let u = GraphUpdate::EdgeInsert {
                i: line.field(1)?,
                j: line.field(2)?,
                w: line.field(3)?,
            };
            g.apply_update(&u)
                .map_err(|e| Error::parse(line.number, e.to_string()))?;
        }
        Ok(g)
    }
}

/// One parsed line of an operation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct OpLine {
    pub line: usize,
    pub update: GraphUpdate,
    pub observation: Option<f64>,
}

pub fn parse_ops(src: &str) -> Result<Vec<OpLine>> {
    let mut ops = Vec::new();
    for line in Lines::new(src) {
        let kind = OpKind::from_code(line.keyword())
            .ok_or_else(|| Error::parse(line.number, format!("unknown op `{}`", line.keyword())))?;
        let mut observation = None;
        let update = match kind {
            OpKind::EdgeInsert | OpKind::WeightChange => {
                line.expect_len(4)?;
                let (i, j, w) = (line.field(1)?, line.field(2)?, line.field(3)?);
                if kind == OpKind::EdgeInsert {
                    GraphUpdate::EdgeInsert { i, j, w }
                } else {
                    GraphUpdate::WeightChange { i, j, w }
                }
            }
            OpKind::EdgeDelete => {
                line.expect_len(3)?;
                GraphUpdate::EdgeDelete {
                    i: line.field(1)?,
                    j: line.field(2)?,
                }
            }
            OpKind::NodeDelete => {
                line.expect_len(2)?;
                GraphUpdate::NodeDelete { i: line.field(1)? }
            }
            OpKind::NodeInsert => {
                let k: usize = line.field(1)?;
                let base = 2 + 2 * k;
                if line.tokens.len() != base && line.tokens.len() != base + 1 {
                    return Err(Error::parse(
                        line.number,
                        format!("`ni {k}` needs {} or {} fields", base, base + 1),
                    ));
                }
                let mut edges = Vec::with_capacity(k);
                for e in 0..k {
                    let id: i64 = line.field(2 + 2 * e)?;
                    let w: f64 = line.field(3 + 2 * e)?;
                    let edge = if id < 0 {
                        IncidentEdge::incoming(id.unsigned_abs() as usize, w)
                    } else {
                        IncidentEdge::out(id as usize, w)
                    };
                    edges.push(edge);
                }
                if line.tokens.len() == base + 1 {
                    observation = Some(line.field(base)?);
                }
                GraphUpdate::NodeInsert { edges }
            }
        };
        ops.push(OpLine {
            line: line.number,
            update,
            observation,
        });
    }
    Ok(ops)
}
