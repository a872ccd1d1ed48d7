//! Matrix embeddings of a graph and their change under graph updates.
//!
//! Two embeddings are supported, both `n × n`:
//!
//! * the weighted adjacency matrix, `M[i][j]` = weight of edge `i → j`;
//! * the weighted Laplacian `L = D − W` of an undirected graph without
//!   self-loops, optionally with a configured degree bound `C`.
//!
//! [`delta_for_update`] expresses the effect of a graph update on the
//! embedding as an ordered list of [`DeltaStep`]s: a permutation first, then
//! structural appends or removals, then rank-one pairs `c·dᵀ`. Replaying the
//! delta with [`apply_delta`] on the embedding of the old graph yields the
//! embedding of the new graph.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, EdgeDirection, GraphUpdate, OpKind};
use crate::matrix::{unit, DenseMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Adjacency,
    /// Undirected graphs only. Node operations need a degree bound.
    Laplacian {
        degree_bound: Option<usize>,
    },
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingKind::Adjacency => f.write_str("adjacency"),
            EmbeddingKind::Laplacian { degree_bound: None } => f.write_str("laplacian"),
            EmbeddingKind::Laplacian {
                degree_bound: Some(c),
            } => write!(f, "laplacian(C={c})"),
        }
    }
}

/// Which graph operations each maintained quantity can absorb
/// incrementally for an embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingCapabilities {
    pub l2_ops: BTreeSet<OpKind>,
    pub svd_ops: BTreeSet<OpKind>,
    pub l1_ops: BTreeSet<OpKind>,
    /// Cost of computing all update vectors for one operation.
    pub update_cost: &'static str,
}

impl EmbeddingKind {
    pub fn capabilities(&self) -> EmbeddingCapabilities {
        use OpKind::*;
        let edge_ops: BTreeSet<OpKind> = [EdgeInsert, EdgeDelete, WeightChange].into();
        let all: BTreeSet<OpKind> = OpKind::ALL.into();
        let svd_ops: BTreeSet<OpKind> = [EdgeInsert, EdgeDelete, WeightChange, NodeInsert].into();
        match self {
            EmbeddingKind::Adjacency => EmbeddingCapabilities {
                l2_ops: all,
                svd_ops,
                l1_ops: edge_ops,
                update_cost: "f(n, m) = n",
            },
            EmbeddingKind::Laplacian { degree_bound: None } => EmbeddingCapabilities {
                l2_ops: edge_ops.clone(),
                svd_ops: edge_ops.clone(),
                l1_ops: edge_ops,
                update_cost: "f(n, m) = n (edge operations only)",
            },
            EmbeddingKind::Laplacian {
                degree_bound: Some(_),
            } => EmbeddingCapabilities {
                l2_ops: all,
                svd_ops,
                l1_ops: edge_ops,
                update_cost: "f(n, m) = C·n",
            },
        }
    }

    /// Rejects graphs the embedding is not defined for.
    pub fn check_graph(&self, g: &DynamicGraph) -> Result<()> {
        if let EmbeddingKind::Laplacian { .. } = self {
            if g.is_directed() {
                return Err(Error::IncompatibleEmbedding(
                    "the Laplacian embedding needs an undirected graph".into(),
                ));
            }
            if g.has_self_loops() {
                return Err(Error::IncompatibleEmbedding(
                    "the Laplacian embedding does not allow self-loops".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePair {
    pub c: Vector,
    pub d: Vector,
}

impl UpdatePair {
    pub fn new(c: Vector, d: Vector) -> Self {
        UpdatePair { c, d }
    }

    /// `scale · e_i · e_jᵀ` in an `rows × cols` matrix.
    fn entry(rows: usize, cols: usize, i: usize, j: usize, scale: f64) -> Self {
        let mut c = Vector::zeros(rows);
        c[i] = scale;
        UpdatePair {
            c,
            d: unit(cols, j),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaStep {
    ApplyPair(UpdatePair),
    AppendColumn(Vector),
    AppendRow(Vector),
    RemoveLastColumn,
    RemoveLastRow,
    /// Swap row and column `i` (0-based) with the last row and column.
    PermuteWithLast(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingDelta {
    pub steps: Vec<DeltaStep>,
}

impl EmbeddingDelta {
    pub fn pair_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, DeltaStep::ApplyPair(_)))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &UpdatePair> {
        self.steps.iter().filter_map(|s| match s {
            DeltaStep::ApplyPair(p) => Some(p),
            _ => None,
        })
    }
}

/// How a node permutation is expressed in a delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutationMode {
    /// A single [`DeltaStep::PermuteWithLast`] step.
    #[default]
    Direct,
    /// Four rank-one pairs: two swap the columns, two swap the rows.
    RankOne,
}

pub fn materialize(g: &DynamicGraph, kind: EmbeddingKind) -> Result<DenseMatrix> {
    kind.check_graph(g)?;
    let n = g.n();
    let mut m = DenseMatrix::zeros(n, n);
    for (i, j, w) in g.edges() {
        match kind {
            EmbeddingKind::Adjacency => m[(i - 1, j - 1)] = w,
            EmbeddingKind::Laplacian { .. } => {
                m[(i - 1, j - 1)] -= w;
                m[(i - 1, i - 1)] += w;
            }
        }
    }
    Ok(m)
}

/// Entry `(r, c)` (0-based) of the embedding of `g`, bit-identical to
/// what [`materialize`] produces.
pub fn entry(g: &DynamicGraph, kind: EmbeddingKind, r: usize, c: usize) -> f64 {
    match kind {
        EmbeddingKind::Adjacency => g.weight(r + 1, c + 1).unwrap_or(0.0),
        EmbeddingKind::Laplacian { .. } if r == c => {
            g.out_edges(r + 1).fold(0.0, |acc, (_, w)| acc + w)
        }
        EmbeddingKind::Laplacian { .. } => g.weight(r + 1, c + 1).map_or(0.0, |w| 0.0 - w),
    }
}

/// Resets every entry touched by a rank-one pair of `delta` to its exact
/// value in the embedding of `g_after`.
///
/// Replaying `old + (new − old)` can land an ulp away from `new`, and a
/// later deletion would then leave a residue of order `1e-17` where the
/// embedding has an exact zero.
pub fn resync_entries(
    m: &mut DenseMatrix,
    g_after: &DynamicGraph,
    kind: EmbeddingKind,
    delta: &EmbeddingDelta,
) {
    let (rows, cols) = m.shape();
    for p in delta.pairs() {
        let rs: Vec<usize> = (0..p.c.len().min(rows))
            .filter(|&r| p.c[r] != 0.0)
            .collect();
        for c in (0..p.d.len().min(cols)).filter(|&c| p.d[c] != 0.0) {
            for &r in &rs {
                m[(r, c)] = entry(g_after, kind, r, c);
            }
        }
    }
}

/// Column `j` (1-based) of the embedding, built from the in-edges of `j`.
fn column_of(g: &DynamicGraph, kind: EmbeddingKind, j: usize) -> Vector {
    let mut col = Vector::zeros(g.n());
    match kind {
        EmbeddingKind::Adjacency => {
            for (i, w) in g.in_edges(j) {
                col[i - 1] = w;
            }
        }
        EmbeddingKind::Laplacian { .. } => {
            for (i, w) in g.in_edges(j) {
                col[i - 1] = -w;
            }
            col[j - 1] = g.weighted_degree(j);
        }
    }
    col
}

fn row_of(g: &DynamicGraph, kind: EmbeddingKind, i: usize) -> Vector {
    let mut row = Vector::zeros(g.n());
    match kind {
        EmbeddingKind::Adjacency => {
            for (j, w) in g.out_edges(i) {
                row[j - 1] = w;
            }
        }
        EmbeddingKind::Laplacian { .. } => {
            for (j, w) in g.out_edges(i) {
                row[j - 1] = -w;
            }
            row[i - 1] = g.weighted_degree(i);
        }
    }
    row
}

/// Four pairs that swap row/column `i` with the last row/column
/// (both 1-based node ids, `i != n`).
fn swap_pairs(g: &DynamicGraph, kind: EmbeddingKind, i: usize) -> [UpdatePair; 4] {
    let n = g.n();
    let (ci, cl) = (column_of(g, kind, i), column_of(g, kind, n));
    let (i0, l0) = (i - 1, n - 1);
    // rows of the column-swapped matrix
    let mut ri = row_of(g, kind, i);
    let mut rl = row_of(g, kind, n);
    ri.swap_rows(i0, l0);
    rl.swap_rows(i0, l0);
    [
        UpdatePair::new(&cl - &ci, unit(n, i0)),
        UpdatePair::new(&ci - &cl, unit(n, l0)),
        UpdatePair::new(unit(n, i0), &rl - &ri),
        UpdatePair::new(unit(n, l0), &ri - &rl),
    ]
}

/// Delta for `u` using a direct permutation step for node deletions.
pub fn delta_for_update(
    g_before: &DynamicGraph,
    u: &GraphUpdate,
    kind: EmbeddingKind,
) -> Result<EmbeddingDelta> {
    delta_for_update_with(g_before, u, kind, PermutationMode::Direct)
}

pub fn delta_for_update_with(
    g: &DynamicGraph,
    u: &GraphUpdate,
    kind: EmbeddingKind,
    mode: PermutationMode,
) -> Result<EmbeddingDelta> {
    kind.check_graph(g)?;
    g.check_update(u)?;
    let caps = kind.capabilities();
    if !caps.l2_ops.contains(&u.kind()) {
        return Err(Error::IncompatibleEmbedding(format!(
            "{kind} cannot absorb `{}` updates without a degree bound",
            u.kind()
        )));
    }
    let n = g.n();
    let mut steps = Vec::new();
    match *u {
        GraphUpdate::EdgeInsert { i, j, .. }
        | GraphUpdate::EdgeDelete { i, j }
        | GraphUpdate::WeightChange { i, j, .. } => {
            let old = g.weight(i, j).unwrap_or(0.0);
            let new = match *u {
                GraphUpdate::EdgeInsert { w, .. } | GraphUpdate::WeightChange { w, .. } => w,
                _ => 0.0,
            };
            let q = new - old;
            if q == 0.0 {
                return Ok(EmbeddingDelta::default());
            }
            let (i0, j0) = (i - 1, j - 1);
            match kind {
                EmbeddingKind::Adjacency => {
                    steps.push(DeltaStep::ApplyPair(UpdatePair::entry(n, n, i0, j0, q)));
                    if !g.is_directed() && i != j {
                        steps.push(DeltaStep::ApplyPair(UpdatePair::entry(n, n, j0, i0, q)));
                    }
                }
                EmbeddingKind::Laplacian { .. } => {
                    if i == j {
                        return Err(Error::IncompatibleEmbedding(
                            "the Laplacian embedding does not allow self-loops".into(),
                        ));
                    }
                    for (r, c, s) in [(i0, j0, -q), (j0, i0, -q), (i0, i0, q), (j0, j0, q)] {
                        steps.push(DeltaStep::ApplyPair(UpdatePair::entry(n, n, r, c, s)));
                    }
                }
            }
        }
        GraphUpdate::NodeInsert { ref edges } => {
            let new_id = n + 1;
            let mut col = Vector::zeros(n);
            let mut row = Vector::zeros(n + 1);
            match kind {
                EmbeddingKind::Adjacency => {
                    for e in edges {
                        if e.neighbor == new_id {
                            row[n] = e.weight;
                            continue;
                        }
                        let directed_in = g.is_directed() && e.direction == EdgeDirection::In;
                        if directed_in || !g.is_directed() {
                            col[e.neighbor - 1] = e.weight;
                        }
                        if !directed_in {
                            row[e.neighbor - 1] = e.weight;
                        }
                    }
                    steps.push(DeltaStep::AppendColumn(col));
                    steps.push(DeltaStep::AppendRow(row));
                }
                EmbeddingKind::Laplacian { degree_bound } => {
                    let bound = degree_bound.unwrap_or(0);
                    if edges.len() > bound {
                        return Err(Error::IncompatibleEmbedding(format!(
                            "node insertion with {} edges exceeds the degree bound {bound}",
                            edges.len()
                        )));
                    }
                    if edges.iter().any(|e| e.neighbor == new_id) {
                        return Err(Error::IncompatibleEmbedding(
                            "the Laplacian embedding does not allow self-loops".into(),
                        ));
                    }
                    for e in edges {
                        col[e.neighbor - 1] = -e.weight;
                        row[e.neighbor - 1] = -e.weight;
                        row[n] += e.weight;
                    }
                    steps.push(DeltaStep::AppendColumn(col));
                    steps.push(DeltaStep::AppendRow(row));
                    for e in edges {
                        let j0 = e.neighbor - 1;
                        steps.push(DeltaStep::ApplyPair(UpdatePair::entry(
                            n + 1,
                            n + 1,
                            j0,
                            j0,
                            e.weight,
                        )));
                    }
                }
            }
        }
        GraphUpdate::NodeDelete { i } => {
            if let EmbeddingKind::Laplacian { degree_bound } = kind {
                let bound = degree_bound.unwrap_or(0);
                if g.neighbor_count(i) > bound {
                    return Err(Error::IncompatibleEmbedding(format!(
                        "node {i} has {} neighbours, above the degree bound {bound}",
                        g.neighbor_count(i)
                    )));
                }
            }
            if i != n {
                match mode {
                    PermutationMode::Direct => steps.push(DeltaStep::PermuteWithLast(i - 1)),
                    PermutationMode::RankOne => {
                        steps.extend(swap_pairs(g, kind, i).into_iter().map(DeltaStep::ApplyPair))
                    }
                }
            }
            steps.push(DeltaStep::RemoveLastColumn);
            steps.push(DeltaStep::RemoveLastRow);
            if let EmbeddingKind::Laplacian { .. } = kind {
                let t = crate::graph::Transposition { a: i, b: n };
                for (j, w) in g.out_edges(i) {
                    let j0 = t.apply(j) - 1;
                    steps.push(DeltaStep::ApplyPair(UpdatePair::entry(
                        n - 1,
                        n - 1,
                        j0,
                        j0,
                        -w,
                    )));
                }
            }
        }
    }
    Ok(EmbeddingDelta { steps })
}

fn check_len(v: &Vector, len: usize) -> Result<()> {
    if v.len() == len {
        Ok(())
    } else {
        Err(Error::shape(len, v.len()))
    }
}

/// Replays a single step on a dense matrix.
pub fn apply_step(m: DenseMatrix, step: &DeltaStep) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    Ok(match step {
        DeltaStep::ApplyPair(p) => {
            check_len(&p.c, rows)?;
            check_len(&p.d, cols)?;
            let mut m = m;
            m.ger(1.0, &p.c, &p.d, 1.0);
            m
        }
        DeltaStep::AppendColumn(a) => {
            check_len(a, rows)?;
            let mut m = m.insert_column(cols, 0.0);
            m.set_column(cols, a);
            m
        }
        DeltaStep::AppendRow(a) => {
            check_len(a, cols)?;
            let mut m = m.insert_row(rows, 0.0);
            m.set_row(rows, &a.transpose());
            m
        }
        DeltaStep::RemoveLastColumn => {
            if cols == 0 {
                return Err(Error::EmptyMatrix);
            }
            m.remove_column(cols - 1)
        }
        DeltaStep::RemoveLastRow => {
            if rows == 0 {
                return Err(Error::EmptyMatrix);
            }
            m.remove_row(rows - 1)
        }
        DeltaStep::PermuteWithLast(i) => {
            if rows != cols {
                return Err(Error::shape("square matrix", format!("{rows}x{cols}")));
            }
            if *i >= rows {
                return Err(Error::shape(format!("index < {rows}"), i));
            }
            let mut m = m;
            m.swap_columns(*i, cols - 1);
            m.swap_rows(*i, rows - 1);
            m
        }
    })
}

pub fn apply_delta(m: &DenseMatrix, delta: &EmbeddingDelta) -> Result<DenseMatrix> {
    delta.steps.iter().try_fold(m.clone(), apply_step)
}
