//! Seeded random graphs and update streams for tests, benchmarks and the
//! CLI.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::embedding::EmbeddingKind;
use crate::graph::{DynamicGraph, GraphUpdate, IncidentEdge, OpKind};
use crate::matrix::DenseMatrix;

/// Knobs for [`random_update`].
#[derive(Debug, Clone)]
pub struct UpdateOptions {
    pub ops: Vec<OpKind>,
    pub integer_weights: bool,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Upper bound on incident edges of an inserted node.
    pub max_new_edges: usize,
}

impl UpdateOptions {
    pub fn new(ops: &[OpKind]) -> Self {
        UpdateOptions {
            ops: ops.to_vec(),
            integer_weights: false,
            min_nodes: 1,
            max_nodes: usize::MAX,
            max_new_edges: 4,
        }
    }

    pub fn integer_weights(mut self, on: bool) -> Self {
        self.integer_weights = on;
        self
    }

    pub fn nodes(mut self, min: usize, max: usize) -> Self {
        self.min_nodes = min;
        self.max_nodes = max;
        self
    }

    pub fn max_new_edges(mut self, k: usize) -> Self {
        self.max_new_edges = k;
        self
    }
}

/// A nonzero weight: an integer in `±1..=5`, or a real with magnitude in
/// `[0.1, 2)`.
pub fn random_weight<R: Rng>(rng: &mut R, integer: bool) -> f64 {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    if integer {
        sign * rng.random_range(1..=5) as f64
    } else {
        sign * rng.random_range(0.1..2.0)
    }
}

/// Erdős–Rényi style graph. Self-loops are only drawn when `self_loops`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    directed: bool,
    edge_prob: f64,
    integer: bool,
    self_loops: bool,
) -> DynamicGraph {
    let mut g = DynamicGraph::new(n, directed);
    for i in 1..=n {
        let start = if directed { 1 } else { i };
        for j in start..=n {
            if (i == j && !self_loops) || !rng.random_bool(edge_prob) {
                continue;
            }
            let w = random_weight(rng, integer);
            g.apply_update(&GraphUpdate::EdgeInsert { i, j, w })
                .expect("fresh edge");
        }
    }
    g
}

/// Random undirected graph without self-loops whose nodes all have at
/// most `bound` neighbours.
pub fn random_bounded_graph<R: Rng>(
    rng: &mut R,
    n: usize,
    bound: usize,
    edge_prob: f64,
    integer: bool,
) -> DynamicGraph {
    let mut g = DynamicGraph::new(n, false);
    for i in 1..=n {
        for j in i + 1..=n {
            if g.neighbor_count(i) < bound
                && g.neighbor_count(j) < bound
                && rng.random_bool(edge_prob)
            {
                let w = random_weight(rng, integer);
                g.apply_update(&GraphUpdate::EdgeInsert { i, j, w })
                    .expect("fresh edge");
            }
        }
    }
    g
}

fn degree_bound(kind: EmbeddingKind) -> Option<usize> {
    match kind {
        EmbeddingKind::Laplacian { degree_bound } => degree_bound,
        EmbeddingKind::Adjacency => None,
    }
}

fn has_room(g: &DynamicGraph, kind: EmbeddingKind, i: usize) -> bool {
    degree_bound(kind).is_none_or(|c| g.neighbor_count(i) < c)
}

fn try_op<R: Rng>(
    rng: &mut R,
    g: &DynamicGraph,
    kind: EmbeddingKind,
    op: OpKind,
    opts: &UpdateOptions,
) -> Option<GraphUpdate> {
    let n = g.n();
    let laplacian = matches!(kind, EmbeddingKind::Laplacian { .. });
    match op {
        OpKind::EdgeInsert => {
            if n == 0 {
                return None;
            }
            for _ in 0..64 {
                let i = rng.random_range(1..=n);
                let j = rng.random_range(1..=n);
                if laplacian && i == j {
                    continue;
                }
                if g.weight(i, j).is_some() {
                    continue;
                }
                if i != j && !(has_room(g, kind, i) && has_room(g, kind, j)) {
                    continue;
                }
                let w = random_weight(rng, opts.integer_weights);
                return Some(GraphUpdate::EdgeInsert { i, j, w });
            }
            None
        }
        OpKind::EdgeDelete | OpKind::WeightChange => {
            let edges = g.canonical_edges();
            let &(i, j, _) = edges.choose(rng)?;
            Some(if op == OpKind::EdgeDelete {
                GraphUpdate::EdgeDelete { i, j }
            } else {
                let w = random_weight(rng, opts.integer_weights);
                GraphUpdate::WeightChange { i, j, w }
            })
        }
        OpKind::NodeInsert => {
            if n >= opts.max_nodes {
                return None;
            }
            let mut limit = opts.max_new_edges.min(n);
            if let Some(c) = degree_bound(kind) {
                limit = limit.min(c);
            }
            let mut candidates: Vec<usize> = (1..=n).filter(|&j| has_room(g, kind, j)).collect();
            candidates.shuffle(rng);
            let k = rng.random_range(0..=limit.min(candidates.len()));
            let mut edges: Vec<IncidentEdge> = candidates[..k]
                .iter()
                .map(|&j| {
                    let w = random_weight(rng, opts.integer_weights);
                    if g.is_directed() && rng.random_bool(0.5) {
                        IncidentEdge::incoming(j, w)
                    } else {
                        IncidentEdge::out(j, w)
                    }
                })
                .collect();
            if !laplacian && rng.random_bool(0.2) {
                edges.push(IncidentEdge::out(
                    n + 1,
                    random_weight(rng, opts.integer_weights),
                ));
            }
            Some(GraphUpdate::NodeInsert { edges })
        }
        OpKind::NodeDelete => {
            if n <= opts.min_nodes {
                return None;
            }
            Some(GraphUpdate::NodeDelete {
                i: rng.random_range(1..=n),
            })
        }
    }
}

/// Draws an update that is valid for `g` and absorbable by `kind`.
/// Returns `None` only when no requested operation is feasible.
pub fn random_update<R: Rng>(
    rng: &mut R,
    g: &DynamicGraph,
    kind: EmbeddingKind,
    opts: &UpdateOptions,
) -> Option<GraphUpdate> {
    let mut ops = opts.ops.clone();
    ops.shuffle(rng);
    ops.into_iter()
        .find_map(|op| try_op(rng, g, kind, op, opts))
}

/// A graph whose adjacency matrix is `Z·B·Zᵀ` for a node-type indicator
/// `Z` and a `types × types` block matrix `B`, so its rank is at most the
/// number of types. Every node carries a self-loop.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub block: DenseMatrix,
    pub node_types: Vec<usize>,
}

impl PlantedModel {
    pub fn new<R: Rng>(rng: &mut R, types: usize, directed: bool) -> Self {
        let mut block = DenseMatrix::from_fn(types, types, |_, _| random_weight(rng, false));
        if !directed {
            block = (&block + block.transpose()) * 0.5;
            // keep every entry nonzero so each pair is a real edge
            block.apply(|w| {
                if w.abs() < 0.05 {
                    *w = 0.5
                }
            });
        }
        PlantedModel {
            block,
            node_types: Vec::new(),
        }
    }

    pub fn types(&self) -> usize {
        self.block.nrows()
    }

    /// Builds the planted graph on `n` nodes with random types.
    pub fn graph<R: Rng>(&mut self, rng: &mut R, n: usize, directed: bool) -> DynamicGraph {
        let mut g = DynamicGraph::new(0, directed);
        for _ in 0..n {
            let u = self.node_insert(rng, &g);
            g.apply_update(&u).expect("planted insert");
        }
        g
    }

    /// A node insertion that keeps the planted structure; the new node's
    /// type is recorded in the model.
    pub fn node_insert<R: Rng>(&mut self, rng: &mut R, g: &DynamicGraph) -> GraphUpdate {
        let t = rng.random_range(0..self.types());
        let n = g.n();
        let mut edges = Vec::with_capacity(2 * n + 1);
        for (j, &tj) in self.node_types.iter().enumerate() {
            edges.push(IncidentEdge::out(j + 1, self.block[(t, tj)]));
            if g.is_directed() {
                edges.push(IncidentEdge::incoming(j + 1, self.block[(tj, t)]));
            }
        }
        edges.push(IncidentEdge::out(n + 1, self.block[(t, t)]));
        self.node_types.push(t);
        GraphUpdate::NodeInsert { edges }
    }
}
