//! Least-squares graph regression kept optimal under graph updates.
//!
//! The state owns the graph, the pseudoinverse of its embedding and the
//! observation vector `b`. After each update the embedding delta is
//! replayed through [`PinvState`] and `x = M†·b` is recomputed with one
//! matrix-vector product.

use crate::embedding::{
    delta_for_update_with, materialize, resync_entries, EmbeddingKind, PermutationMode,
};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, GraphUpdate, Transposition};
use crate::matrix::{mul_vec, DenseMatrix, Vector};
use crate::pinv::PinvState;

/// What a single [`L2State::update`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Outcome {
    pub pairs_applied: usize,
    pub transposition: Option<Transposition>,
}

/// `x = M†·b` followed by one refinement step `x += M†·(b − M·x)`. The
/// step changes nothing in exact arithmetic (`M†·M·M† = M†`) but removes
/// the first-order effect of errors in `M†` on the residual, which matters
/// when `M` is ill-conditioned and the system nearly consistent.
fn solve(pinv: &PinvState, b: &Vector) -> Vector {
    let mut x = mul_vec(pinv.pinv(), b);
    let r = b - mul_vec(pinv.matrix(), &x);
    x += mul_vec(pinv.pinv(), &r);
    x
}

#[derive(Debug, Clone)]
pub struct L2State {
    graph: DynamicGraph,
    kind: EmbeddingKind,
    mode: PermutationMode,
    pinv: PinvState,
    b: Vector,
    x: Vector,
}

impl L2State {
    pub fn new(graph: DynamicGraph, kind: EmbeddingKind, b: Vector) -> Result<Self> {
        let m = materialize(&graph, kind)?;
        if b.len() != m.nrows() {
            return Err(Error::shape(m.nrows(), b.len()));
        }
        let pinv = PinvState::from_matrix(m)?;
        Self::from_parts(graph, kind, pinv, b)
    }

    /// Assembles a state from an already computed pseudoinverse, e.g. one
    /// restored from a checkpoint.
    pub fn from_parts(
        graph: DynamicGraph,
        kind: EmbeddingKind,
        pinv: PinvState,
        b: Vector,
    ) -> Result<Self> {
        let (rows, cols) = pinv.shape();
        if rows != graph.n() || cols != graph.n() {
            return Err(Error::shape(
                format!("{0}x{0}", graph.n()),
                format!("{rows}x{cols}"),
            ));
        }
        if b.len() != rows {
            return Err(Error::shape(rows, b.len()));
        }
        let x = solve(&pinv, &b);
        Ok(L2State {
            graph,
            kind,
            mode: PermutationMode::Direct,
            pinv,
            b,
            x,
        })
    }

    pub fn with_permutation_mode(mut self, mode: PermutationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_step_guard(mut self, on: bool) -> Self {
        self.pinv = self.pinv.with_step_guard(on);
        self
    }

    pub fn graph(&self) -> &DynamicGraph {
        &self.graph
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn pinv(&self) -> &PinvState {
        &self.pinv
    }

    pub fn matrix(&self) -> &DenseMatrix {
        self.pinv.matrix()
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    /// `‖M·x − b‖₂`
    pub fn residual(&self) -> f64 {
        (mul_vec(self.pinv.matrix(), &self.x) - &self.b).norm()
    }

    /// Applies `u`. A node insertion needs the new node's observation.
    pub fn update(&mut self, u: &GraphUpdate, observation: Option<f64>) -> Result<L2Outcome> {
        let new_entry = match u {
            GraphUpdate::NodeInsert { .. } => Some(observation.ok_or(Error::MissingObservation)?),
            _ => None,
        };
        let delta = delta_for_update_with(&self.graph, u, self.kind, self.mode)?;
        self.pinv.apply_delta(&delta)?;
        let transposition = self.graph.apply_update(u)?;
        resync_entries(self.pinv.matrix_mut(), &self.graph, self.kind, &delta);
        if let Some(t) = transposition {
            t.permute_slice(self.b.as_mut_slice());
        }
        if let GraphUpdate::NodeDelete { .. } = u {
            let last = self.b.len() - 1;
            self.b = std::mem::replace(&mut self.b, Vector::zeros(0)).remove_row(last);
        }
        if let Some(v) = new_entry {
            let len = self.b.len();
            self.b = std::mem::replace(&mut self.b, Vector::zeros(0)).insert_row(len, v);
        }
        self.x = solve(&self.pinv, &self.b);
        Ok(L2Outcome {
            pairs_applied: delta.pair_count(),
            transposition,
        })
    }
}
