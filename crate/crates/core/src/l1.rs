//! Least-absolute-deviation regression `argmin_x ‖M·x − b‖₁` with warm
//! starts.
//!
//! The problem is solved as the linear program
//!
//! ```text
//! minimize 1ᵀu + 1ᵀv   subject to   M·x + u − v = b,   u, v ≥ 0,   x free
//! ```
//!
//! by a revised simplex method that keeps the basis inverse explicitly and
//! refactorizes it periodically. Pricing is Dantzig's rule; after
//! [`STALL_LIMIT`] pivots without progress it switches to Bland's rule until
//! the objective moves again.
//!
//! After a rank-one change of `M` the previous optimal basis is repaired
//! rather than discarded: basic columns of `x` that changed are swapped in
//! place (or traded for a slack if the basis would become singular), and
//! basic slacks that turned negative trade `u_i` for `v_i`. The repaired
//! basis is primal feasible, so re-optimization starts from it directly.
//!
//! At an optimum the simplex multipliers `y` certify optimality:
//! `‖y‖_∞ ≤ 1`, `Mᵀ·y = 0` and `bᵀ·y` equals the objective.

use std::collections::BTreeSet;

use crate::embedding::{delta_for_update, resync_entries, EmbeddingKind};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, GraphUpdate};
use crate::matrix::{mul_vec, tr_mul_vec, DenseMatrix, Vector};

/// Non-improving pivots tolerated before switching to Bland's rule.
pub const STALL_LIMIT: usize = 50;
/// Eta updates between refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 64;
const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Certificate {
    /// `‖y‖_∞`, at most 1 at an optimum.
    pub dual_inf_norm: f64,
    /// `‖Mᵀ·y‖_∞`, zero at an optimum.
    pub stationarity: f64,
    /// `|objective − bᵀ·y|`
    pub gap: f64,
}

impl L1Certificate {
    pub fn passes(&self, objective: f64, tol: f64) -> bool {
        self.dual_inf_norm <= 1.0 + tol
            && self.stationarity <= tol
            && self.gap <= tol * objective.max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct L1State {
    m: DenseMatrix,
    b: Vector,
    /// Variable index of each basic position: `x_j` is `j`, `u_i` is
    /// `cols + i`, `v_i` is `cols + rows + i`.
    basis: Vec<usize>,
    binv: DenseMatrix,
    xb: Vector,
    etas: usize,
    x: Vector,
    objective: f64,
    last_pivots: usize,
    total_pivots: usize,
}

enum Var {
    X(usize),
    U(usize),
    V(usize),
}

impl L1State {
    /// Solves from the slack basis.
    pub fn solve(m: DenseMatrix, b: Vector) -> Result<Self> {
        let rows = m.nrows();
        if b.len() != rows {
            return Err(Error::shape(rows, b.len()));
        }
        let cols = m.ncols();
        let mut s = L1State {
            basis: Vec::new(),
            binv: DenseMatrix::zeros(rows, rows),
            xb: Vector::zeros(rows),
            etas: 0,
            x: Vector::zeros(cols),
            objective: 0.0,
            last_pivots: 0,
            total_pivots: 0,
            m,
            b,
        };
        s.slack_basis();
        s.optimize()?;
        Ok(s)
    }

    /// Restarts from a stored basis, e.g. one read from a checkpoint.
    pub fn with_basis(m: DenseMatrix, b: Vector, basis: Vec<usize>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if b.len() != rows {
            return Err(Error::shape(rows, b.len()));
        }
        if basis.len() != rows {
            return Err(Error::shape(rows, basis.len()));
        }
        let distinct: BTreeSet<usize> = basis.iter().copied().collect();
        if distinct.len() != rows || basis.iter().any(|&j| j >= cols + 2 * rows) {
            return Err(Error::Verification("invalid basis".into()));
        }
        let mut s = L1State {
            basis,
            binv: DenseMatrix::zeros(rows, rows),
            xb: Vector::zeros(rows),
            etas: 0,
            x: Vector::zeros(cols),
            objective: 0.0,
            last_pivots: 0,
            total_pivots: 0,
            m,
            b,
        };
        s.refactor()?;
        s.make_feasible();
        s.optimize()?;
        Ok(s)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    /// Pivots spent by the most recent solve or update.
    pub fn last_pivots(&self) -> usize {
        self.last_pivots
    }

    pub fn total_pivots(&self) -> usize {
        self.total_pivots
    }

    /// `‖M·x − b‖₁` recomputed from `x`.
    pub fn residual_l1(&self) -> f64 {
        (&self.m * &self.x - &self.b).abs().sum()
    }

    fn rows(&self) -> usize {
        self.m.nrows()
    }

    fn cols(&self) -> usize {
        self.m.ncols()
    }

    fn var(&self, j: usize) -> Var {
        let (rows, cols) = (self.rows(), self.cols());
        if j < cols {
            Var::X(j)
        } else if j < cols + rows {
            Var::U(j - cols)
        } else {
            Var::V(j - cols - rows)
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.cols() {
            0.0
        } else {
            1.0
        }
    }

    fn column(&self, j: usize) -> Vector {
        let rows = self.rows();
        match self.var(j) {
            Var::X(j) => self.m.column(j).into_owned(),
            Var::U(i) => crate::matrix::unit(rows, i),
            Var::V(i) => -crate::matrix::unit(rows, i),
        }
    }

    fn slack_basis(&mut self) {
        let (rows, cols) = (self.rows(), self.cols());
        self.basis = (0..rows)
            .map(|i| {
                if self.b[i] >= 0.0 {
                    cols + i
                } else {
                    cols + rows + i
                }
            })
            .collect();
        self.binv = DenseMatrix::from_fn(rows, rows, |i, j| {
            if i != j {
                0.0
            } else if self.b[i] >= 0.0 {
                1.0
            } else {
                -1.0
            }
        });
        self.xb = self.b.abs();
        self.etas = 0;
    }

    fn refactor(&mut self) -> Result<()> {
        let rows = self.rows();
        let mut bmat = DenseMatrix::zeros(rows, rows);
        for (p, &j) in self.basis.iter().enumerate() {
            bmat.set_column(p, &self.column(j));
        }
        self.binv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Verification("singular simplex basis".into()))?;
        self.xb = mul_vec(&self.binv, &self.b);
        self.etas = 0;
        Ok(())
    }

    /// Replaces the variable at basic position `p` by `entering`, whose
    /// column in the current basis coordinates is `w`.
    fn pivot(&mut self, p: usize, entering: usize, w: &Vector) {
        let piv = w[p];
        let prow = self.binv.row(p) / piv;
        for i in 0..self.rows() {
            if i != p && w[i] != 0.0 {
                let f = w[i];
                let mut row = self.binv.row_mut(i);
                row -= &prow * f;
            }
        }
        self.binv.set_row(p, &prow);
        self.basis[p] = entering;
        self.etas += 1;
    }

    /// Swaps basic slacks with negative values for their mirror variable.
    fn make_feasible(&mut self) {
        let (rows, cols) = (self.rows(), self.cols());
        for p in 0..rows {
            if self.xb[p] >= 0.0 {
                continue;
            }
            let mirror = match self.var(self.basis[p]) {
                Var::X(_) => continue,
                Var::U(i) => cols + rows + i,
                Var::V(i) => cols + i,
            };
            self.basis[p] = mirror;
            self.binv.row_mut(p).neg_mut();
            self.xb[p] = -self.xb[p];
        }
    }

    fn extract(&mut self) {
        let cols = self.cols();
        self.x = Vector::zeros(cols);
        for (p, &j) in self.basis.iter().enumerate() {
            if j < cols {
                self.x[j] = self.xb[p];
            }
        }
        self.objective = self.residual_l1();
    }

    fn duals(&self) -> Vector {
        let cb = Vector::from_iterator(self.rows(), self.basis.iter().map(|&j| self.cost(j)));
        tr_mul_vec(&self.binv, &cb)
    }

    /// Entering variable and direction (`+1` increase, `-1` decrease).
    fn price(&self, y: &Vector, in_basis: &[bool], bland: bool) -> Option<(usize, f64)> {
        let my = tr_mul_vec(&self.m, y);
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, _) in in_basis.iter().enumerate().filter(|(_, &b)| !b) {
            let (gain, dir) = match self.var(j) {
                Var::X(k) => (my[k].abs(), if my[k] > 0.0 { 1.0 } else { -1.0 }),
                // reduced cost 1 − y_i for u_i and 1 + y_i for v_i
                Var::U(i) => (y[i] - 1.0, 1.0),
                Var::V(i) => (-y[i] - 1.0, 1.0),
            };
            if gain <= PRICE_TOL {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, g, _)| gain > g) {
                best = Some((j, gain, dir));
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    fn optimize(&mut self) -> Result<()> {
        let width = self.cols() + 2 * self.rows();
        let mut pivots = 0;
        let mut stalled = 0;
        let mut clean = self.etas == 0;
        loop {
            if self.etas >= REFACTOR_EVERY {
                self.refactor()?;
                self.make_feasible();
            }
            let y = self.duals();
            let mut in_basis = vec![false; width];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let Some((q, dir)) = self.price(&y, &in_basis, stalled >= STALL_LIMIT) else {
                if clean {
                    break;
                }
                // confirm optimality on a freshly factorized basis
                self.refactor()?;
                self.make_feasible();
                clean = true;
                continue;
            };
            clean = false;
            let w = mul_vec(&self.binv, &self.column(q));
            let bland = stalled >= STALL_LIMIT;
            let mut leave: Option<(usize, f64)> = None;
            for p in 0..self.rows() {
                if self.basis[p] < self.cols() {
                    continue; // free variables never block
                }
                let wp = dir * w[p];
                if wp <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[p].max(0.0) / wp;
                leave = match leave {
                    None => Some((p, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best);
                        let better = if tie {
                            if bland {
                                self.basis[p] < self.basis[r]
                            } else {
                                wp > dir * w[r]
                            }
                        } else {
                            ratio < best
                        };
                        Some(if better { (p, ratio) } else { (r, best) })
                    }
                };
            }
            let Some((p, t)) = leave else {
                return Err(Error::ConvergenceFailure(pivots));
            };
            self.xb.axpy(-t * dir, &w, 1.0);
            self.xb[p] = dir * t;
            self.pivot(p, q, &w);
            pivots += 1;
            if t > 1e-14 {
                stalled = 0;
            } else {
                stalled += 1;
            }
            if pivots > MAX_PIVOTS {
                return Err(Error::ConvergenceFailure(pivots));
            }
        }
        self.last_pivots = pivots;
        self.total_pivots += pivots;
        self.extract();
        Ok(())
    }

    /// Changes `M` with `change`, repairs the basis for the listed columns
    /// and re-optimizes. Returns the pivots spent.
    pub(crate) fn modify(
        &mut self,
        change: impl FnOnce(&mut DenseMatrix),
        columns: &BTreeSet<usize>,
    ) -> Result<usize> {
        change(&mut self.m);
        let (rows, cols) = (self.rows(), self.cols());
        for p in 0..rows {
            let j = self.basis[p];
            if j >= cols || !columns.contains(&j) {
                continue;
            }
            let w = mul_vec(&self.binv, &self.column(j));
            if w[p].abs() > PIVOT_TOL * w.amax().max(1.0) {
                self.pivot(p, j, &w);
                continue;
            }
            // the new column would make the basis singular: bring in the
            // slack whose row carries the most weight at position p
            let in_basis: BTreeSet<usize> = self.basis.iter().copied().collect();
            let r = (0..rows)
                .filter(|&r| {
                    !in_basis.contains(&(cols + r)) && !in_basis.contains(&(cols + rows + r))
                })
                .max_by(|&a, &b| self.binv[(p, a)].abs().total_cmp(&self.binv[(p, b)].abs()))
                .ok_or_else(|| Error::Verification("no slack available for basis repair".into()))?;
            let w = self.binv.column(r).into_owned();
            self.pivot(p, cols + r, &w);
        }
        self.refactor()?;
        self.make_feasible();
        self.optimize()?;
        Ok(self.last_pivots)
    }

    /// `M ← M + c·dᵀ`, then re-optimizes from the repaired basis.
    pub fn rank1_update(&mut self, c: &Vector, d: &Vector) -> Result<usize> {
        let (rows, cols) = (self.rows(), self.cols());
        if c.len() != rows {
            return Err(Error::shape(rows, c.len()));
        }
        if d.len() != cols {
            return Err(Error::shape(cols, d.len()));
        }
        let touched: BTreeSet<usize> = (0..cols).filter(|&j| d[j] != 0.0).collect();
        self.modify(|m| m.ger(1.0, c, d, 1.0), &touched)
    }

    /// Optimality certificate from the simplex multipliers.
    pub fn certificate(&self) -> L1Certificate {
        let y = self.duals();
        L1Certificate {
            dual_inf_norm: y.amax(),
            stationarity: tr_mul_vec(&self.m, &y).amax(),
            gap: (self.objective - self.b.dot(&y)).abs(),
        }
    }
}

/// A graph with the l1 regression solution for its embedding.
#[derive(Debug, Clone)]
pub struct GraphL1 {
    graph: DynamicGraph,
    kind: EmbeddingKind,
    state: L1State,
}

impl GraphL1 {
    pub fn new(graph: DynamicGraph, kind: EmbeddingKind, b: Vector) -> Result<Self> {
        let m = crate::embedding::materialize(&graph, kind)?;
        let state = L1State::solve(m, b)?;
        Ok(GraphL1 { graph, kind, state })
    }

    pub fn from_parts(graph: DynamicGraph, kind: EmbeddingKind, state: L1State) -> Result<Self> {
        let m = crate::embedding::materialize(&graph, kind)?;
        if m != state.m {
            return Err(Error::Verification(
                "stored matrix does not match the graph".into(),
            ));
        }
        Ok(GraphL1 { graph, kind, state })
    }

    pub fn graph(&self) -> &DynamicGraph {
        &self.graph
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn state(&self) -> &L1State {
        &self.state
    }

    /// Applies an edge update and re-optimizes; returns
    /// `(pairs applied, pivots)`.
    pub fn update(&mut self, u: &GraphUpdate) -> Result<(usize, usize)> {
        if !u.kind().is_edge_op() {
            return Err(Error::UnsupportedOperation(
                "l1 regression supports edge updates only".into(),
            ));
        }
        let delta = delta_for_update(&self.graph, u, self.kind)?;
        let mut after = self.graph.clone();
        after.apply_update(u)?;
        let touched: BTreeSet<usize> = delta
            .pairs()
            .flat_map(|p| (0..p.d.len()).filter(move |&j| p.d[j] != 0.0))
            .collect();
        let kind = self.kind;
        let pivots = if delta.is_empty() {
            0
        } else {
            self.state.modify(
                |m| {
                    for p in delta.pairs() {
                        m.ger(1.0, &p.c, &p.d, 1.0);
                    }
                    resync_entries(m, &after, kind, &delta);
                },
                &touched,
            )?
        };
        self.graph = after;
        Ok((delta.pair_count(), pivots))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_graph, random_update, UpdateOptions};
    use crate::graph::OpKind;
    use crate::oracle;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-8 * b.abs().max(1.0)
    }

    #[test]
    fn median_example() {
        let s = L1State::solve(dmatrix![1.0; 1.0; 1.0], v(&[0.0, 0.0, 10.0])).unwrap();
        assert!(s.x()[0].abs() < 1e-12);
        assert!((s.objective() - 10.0).abs() < 1e-12);
        assert!(s.certificate().passes(s.objective(), 1e-8));
    }

    #[test]
    fn consistent_system() {
        let m = dmatrix![1.0, 0.0; 1.0, 1.0; 0.0, 2.0];
        let b = &m * v(&[1.5, -2.0]);
        let s = L1State::solve(m, b).unwrap();
        assert!(s.objective() < 1e-12);
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..30 {
            let m = DenseMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
            let b = Vector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
            let (_, expected) = oracle::oracle_l1(&m, &b).unwrap();
            let s = L1State::solve(m, b).unwrap();
            assert!(
                close(s.objective(), expected),
                "{} vs {expected}",
                s.objective()
            );
            assert!(
                s.certificate().passes(s.objective(), 1e-8),
                "{:?}",
                s.certificate()
            );
            assert!((s.objective() - s.residual_l1()).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_updates_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let m = DenseMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
        let b = Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let mut s = L1State::solve(m, b).unwrap();
        for _ in 0..30 {
            let c = Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let mut d = Vector::zeros(5);
            d[rng.random_range(0..5)] = rng.random_range(-1.0..1.0);
            s.rank1_update(&c, &d).unwrap();
            let (_, expected) = oracle::oracle_l1(s.matrix(), s.b()).unwrap();
            assert!(close(s.objective(), expected));
            assert!(s.certificate().passes(s.objective(), 1e-8));
        }
    }

    #[test]
    fn graph_edge_insert_reaching_span() {
        // M = 0 on two nodes, b = (2, 0): inserting edge 1→1 with weight 1
        // makes b = M·(2, 0)
        let g = DynamicGraph::new(2, true);
        let mut s = GraphL1::new(g, EmbeddingKind::Adjacency, v(&[2.0, 0.0])).unwrap();
        assert!((s.state().objective() - 2.0).abs() < 1e-12);
        s.update(&GraphUpdate::EdgeInsert { i: 1, j: 1, w: 1.0 })
            .unwrap();
        assert!(s.state().objective() < 1e-12);
    }

    #[test]
    fn unchanged_weight_is_a_no_op() {
        let g = DynamicGraph::from_edges(2, true, &[(1, 2, 3.0)]).unwrap();
        let mut s = GraphL1::new(g, EmbeddingKind::Adjacency, v(&[1.0, 4.0])).unwrap();
        let before = s.state().x().clone();
        let (pairs, pivots) = s
            .update(&GraphUpdate::WeightChange { i: 1, j: 2, w: 3.0 })
            .unwrap();
        assert_eq!((pairs, pivots), (0, 0));
        assert_eq!(s.state().x(), &before);
    }

    #[test]
    fn node_ops_are_rejected() {
        let g = DynamicGraph::from_edges(2, true, &[(1, 2, 3.0)]).unwrap();
        let mut s = GraphL1::new(g, EmbeddingKind::Adjacency, v(&[1.0, 4.0])).unwrap();
        assert!(matches!(
            s.update(&GraphUpdate::NodeDelete { i: 1 }),
            Err(Error::UnsupportedOperation(_))
        ));
        assert!(matches!(
            s.update(&GraphUpdate::NodeInsert { edges: vec![] }),
            Err(Error::UnsupportedOperation(_))
        ));
    }

    #[test]
    fn laplacian_updates_match_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let kind = EmbeddingKind::Laplacian { degree_bound: None };
        let g = random_graph(&mut rng, 8, false, 0.3, false, false);
        let b = Vector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let mut s = GraphL1::new(g, kind, b).unwrap();
        let opts =
            UpdateOptions::new(&[OpKind::EdgeInsert, OpKind::EdgeDelete, OpKind::WeightChange]);
        for _ in 0..30 {
            let u = random_update(&mut rng, s.graph(), kind, &opts).unwrap();
            s.update(&u).unwrap();
            let scratch =
                L1State::solve(s.state().matrix().clone(), s.state().b().clone()).unwrap();
            assert!(close(s.state().objective(), scratch.objective()));
            assert!(s.state().certificate().passes(s.state().objective(), 1e-8));
        }
    }

    #[test]
    fn restart_from_stored_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let m = DenseMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = Vector::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
        let s = L1State::solve(m.clone(), b.clone()).unwrap();
        let r = L1State::with_basis(m, b, s.basis().to_vec()).unwrap();
        assert_eq!(r.last_pivots(), 0);
        assert!(close(r.objective(), s.objective()));
    }
}
