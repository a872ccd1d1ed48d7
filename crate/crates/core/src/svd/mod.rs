//! Thin SVD maintenance under rank-one updates and row/column appends.
//!
//! A rank-one change `M + c·dᵀ` is absorbed by projecting `c` and `d` onto
//! the current singular subspaces, diagonalizing the `(k+1) × (k+1)` core
//!
//! ```text
//! [ diag(σ)  0 ]   [ Uᵀc ] [ Vᵀd ]ᵀ
//! [   0      0 ] + [ ‖p‖ ] [ ‖q‖ ]
//! ```
//!
//! (`p`, `q` the parts of `c`, `d` outside the subspaces) and rotating the
//! extended bases. Appending a column is the rank-one update
//! `[M 0] + a·e_{m+1}ᵀ`, and appending a row is its transpose. Each update
//! costs `O((n + m)·k² + k³)`.

mod jacobi;

use crate::cost;
use crate::embedding::{delta_for_update, DeltaStep, EmbeddingKind};
use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, GraphUpdate, OpKind};
use crate::matrix::{mat_mul, mul_vec, tr_mul_vec, unit, DenseMatrix, Vector};
use crate::oracle;

/// Default relative truncation threshold for singular values.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

/// Parts of `c` outside `span(basis)` are treated as zero below this
/// fraction of `‖c‖`.
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SvdState {
    u: DenseMatrix,
    sigma: Vector,
    v: DenseMatrix,
    rank_cap: Option<usize>,
    trunc_tol: f64,
    reorthogonalizations: usize,
}

/// Splits `c` into coordinates in `basis` and a residual, with one round
/// of re-orthogonalization.
fn project(basis: &DenseMatrix, c: &Vector) -> (Vector, Vector, f64) {
    let mut coords = tr_mul_vec(basis, c);
    let mut resid = c - mul_vec(basis, &coords);
    let again = tr_mul_vec(basis, &resid);
    resid -= mul_vec(basis, &again);
    coords += again;
    let norm = resid.norm();
    if norm <= RESIDUAL_TOL * c.norm() {
        return (coords, Vector::zeros(c.len()), 0.0);
    }
    let dir = resid / norm;
    (coords, dir, norm)
}

fn orthogonality_error(q: &DenseMatrix) -> f64 {
    let k = q.ncols();
    cost::add_flops(q.nrows() * k * k);
    (q.tr_mul(q) - DenseMatrix::identity(k, k)).norm()
}

impl SvdState {
    /// Truncated SVD of `m`, keeping at most `rank_cap` triplets (all when
    /// `None`).
    pub fn from_matrix(m: &DenseMatrix, rank_cap: Option<usize>) -> Result<Self> {
        Self::with_tolerance(m, rank_cap, DEFAULT_TRUNC_TOL)
    }

    pub fn with_tolerance(
        m: &DenseMatrix,
        rank_cap: Option<usize>,
        trunc_tol: f64,
    ) -> Result<Self> {
        let cap = rank_cap.unwrap_or(usize::MAX);
        let o = oracle::oracle_truncated_svd(m, cap, trunc_tol)?;
        Ok(SvdState {
            u: o.u,
            sigma: o.sigma,
            v: o.v,
            rank_cap,
            trunc_tol,
            reorthogonalizations: 0,
        })
    }

    /// Rebuilds a state from stored factors after checking their shapes,
    /// ordering and orthonormality.
    pub fn from_parts(
        u: DenseMatrix,
        sigma: Vector,
        v: DenseMatrix,
        rank_cap: Option<usize>,
        trunc_tol: f64,
    ) -> Result<Self> {
        let k = sigma.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::shape(
                format!("{k} columns"),
                format!("{} and {}", u.ncols(), v.ncols()),
            ));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || sigma.as_slice().windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::Verification(
                "singular values must be positive and nonincreasing".into(),
            ));
        }
        let limit = 1e-10 * k.max(1) as f64;
        if orthogonality_error(&u) > limit || orthogonality_error(&v) > limit {
            return Err(Error::Verification("factors are not orthonormal".into()));
        }
        Ok(SvdState {
            u,
            sigma,
            v,
            rank_cap,
            trunc_tol,
            reorthogonalizations: 0,
        })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn sigma(&self) -> &Vector {
        &self.sigma
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn rank_cap(&self) -> Option<usize> {
        self.rank_cap
    }

    pub fn trunc_tol(&self) -> f64 {
        self.trunc_tol
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// Times the factors drifted far enough from orthonormal to be
    /// re-orthogonalized.
    pub fn reorthogonalizations(&self) -> usize {
        self.reorthogonalizations
    }

    /// `U·diag(σ)·Vᵀ`
    pub fn low_rank_approx(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Keeps the leading triplets of a core factorization. Values below
    /// `trunc_tol` times the larger of `scale` and the new top singular
    /// value are dropped.
    fn install(&mut self, u: DenseMatrix, sigma: Vector, v: DenseMatrix, scale: f64) {
        let top = sigma.get(0).copied().unwrap_or(0.0).max(scale);
        let cap = self.rank_cap.unwrap_or(usize::MAX);
        let keep = sigma
            .iter()
            .take_while(|&&s| s > 0.0 && s > self.trunc_tol * top)
            .count()
            .min(cap);
        self.u = u.columns(0, keep).into_owned();
        self.v = v.columns(0, keep).into_owned();
        self.sigma = sigma.rows(0, keep).into_owned();
        self.normalize_signs();
    }

    /// Makes the first significant entry of every left singular vector
    /// positive.
    fn normalize_signs(&mut self) {
        for j in 0..self.u.ncols() {
            let col = self.u.column(j);
            let peak = col.amax();
            if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * peak) {
                if *first < 0.0 {
                    self.u.column_mut(j).neg_mut();
                    self.v.column_mut(j).neg_mut();
                }
            }
        }
    }

    fn reorthogonalize_if_needed(&mut self) -> Result<()> {
        let k = self.rank();
        let limit = 1e-10 * k.max(1) as f64;
        if k == 0
            || (orthogonality_error(&self.u) <= limit && orthogonality_error(&self.v) <= limit)
        {
            return Ok(());
        }
        self.reorthogonalizations += 1;
        let (qu, ru) = self.u.clone().qr().unpack();
        let (qv, rv) = self.v.clone().qr().unpack();
        let core = ru * DenseMatrix::from_diagonal(&self.sigma) * rv.transpose();
        let (cu, cs, cv) = jacobi::jacobi_svd(&core)?;
        let u = mat_mul(&qu, &cu);
        let v = mat_mul(&qv, &cv);
        self.install(u, cs, v, 0.0);
        Ok(())
    }

    /// Absorbs `M ← M + c·dᵀ`.
    pub fn rank1_update(&mut self, c: &Vector, d: &Vector) -> Result<()> {
        let (rows, cols) = self.shape();
        if c.len() != rows {
            return Err(Error::shape(rows, c.len()));
        }
        if d.len() != cols {
            return Err(Error::shape(cols, d.len()));
        }
        if c.norm() == 0.0 || d.norm() == 0.0 {
            return Ok(());
        }
        let k = self.rank();
        let (mc, p, ra) = project(&self.u, c);
        let (nd, q, rb) = project(&self.v, d);

        let mut core = DenseMatrix::zeros(k + 1, k + 1);
        for i in 0..k {
            core[(i, i)] = self.sigma[i];
        }
        let left = mc.push(ra);
        let right = nd.push(rb);
        core.ger(1.0, &left, &right, 1.0);
        let (cu, cs, cv) = jacobi::jacobi_svd(&core)?;

        let mut ext_u = self.u.clone().insert_column(k, 0.0);
        ext_u.set_column(k, &p);
        let mut ext_v = self.v.clone().insert_column(k, 0.0);
        ext_v.set_column(k, &q);
        let u = mat_mul(&ext_u, &cu);
        let v = mat_mul(&ext_v, &cv);
        // cancellation can leave noise far below the inputs' scale
        let scale = self
            .sigma
            .get(0)
            .copied()
            .unwrap_or(0.0)
            .max(c.norm() * d.norm());
        self.install(u, cs, v, scale);
        self.reorthogonalize_if_needed()
    }

    /// `M ← [M a]`
    pub fn append_column(&mut self, a: &Vector) -> Result<()> {
        let (rows, cols) = self.shape();
        if a.len() != rows {
            return Err(Error::shape(rows, a.len()));
        }
        self.v = std::mem::replace(&mut self.v, DenseMatrix::zeros(0, 0)).insert_row(cols, 0.0);
        self.rank1_update(a, &unit(cols + 1, cols))
    }

    /// `M ← [M; aᵀ]`
    pub fn append_row(&mut self, a: &Vector) -> Result<()> {
        let (rows, cols) = self.shape();
        if a.len() != cols {
            return Err(Error::shape(cols, a.len()));
        }
        self.u = std::mem::replace(&mut self.u, DenseMatrix::zeros(0, 0)).insert_row(rows, 0.0);
        self.rank1_update(&unit(rows + 1, rows), a)
    }

    pub fn apply_step(&mut self, step: &DeltaStep) -> Result<()> {
        match step {
            DeltaStep::ApplyPair(p) => self.rank1_update(&p.c, &p.d),
            DeltaStep::AppendColumn(a) => self.append_column(a),
            DeltaStep::AppendRow(a) => self.append_row(a),
            DeltaStep::RemoveLastColumn
            | DeltaStep::RemoveLastRow
            | DeltaStep::PermuteWithLast(_) => Err(Error::UnsupportedOperation(
                "the SVD engine does not support node deletion".into(),
            )),
        }
    }
}

/// Applies graph update `u` to the SVD of `kind`'s embedding of `g_before`.
pub fn update_svd_for_graph(
    s: &mut SvdState,
    g_before: &DynamicGraph,
    u: &GraphUpdate,
    kind: EmbeddingKind,
) -> Result<usize> {
    check_svd_op(kind, u)?;
    let delta = delta_for_update(g_before, u, kind)?;
    for step in &delta.steps {
        s.apply_step(step)?;
    }
    Ok(delta.pair_count())
}

fn check_svd_op(kind: EmbeddingKind, u: &GraphUpdate) -> Result<()> {
    if u.kind() == OpKind::NodeDelete {
        return Err(Error::UnsupportedOperation(
            "the SVD engine does not support node deletion".into(),
        ));
    }
    if !kind.capabilities().svd_ops.contains(&u.kind()) {
        return Err(Error::IncompatibleEmbedding(format!(
            "{kind} cannot absorb `{}` updates in the SVD engine",
            u.kind()
        )));
    }
    Ok(())
}

/// A graph together with the maintained SVD of its embedding.
#[derive(Debug, Clone)]
pub struct GraphSvd {
    graph: DynamicGraph,
    kind: EmbeddingKind,
    svd: SvdState,
}

impl GraphSvd {
    pub fn new(graph: DynamicGraph, kind: EmbeddingKind, rank_cap: Option<usize>) -> Result<Self> {
        let m = crate::embedding::materialize(&graph, kind)?;
        let svd = SvdState::from_matrix(&m, rank_cap)?;
        Ok(GraphSvd { graph, kind, svd })
    }

    pub fn from_parts(graph: DynamicGraph, kind: EmbeddingKind, svd: SvdState) -> Result<Self> {
        kind.check_graph(&graph)?;
        if svd.shape() != (graph.n(), graph.n()) {
            return Err(Error::shape(
                format!("{0}x{0}", graph.n()),
                format!("{}x{}", svd.shape().0, svd.shape().1),
            ));
        }
        Ok(GraphSvd { graph, kind, svd })
    }

    pub fn graph(&self) -> &DynamicGraph {
        &self.graph
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn svd(&self) -> &SvdState {
        &self.svd
    }

    /// Applies `u`; returns the number of rank-one pairs absorbed.
    pub fn update(&mut self, u: &GraphUpdate) -> Result<usize> {
        check_svd_op(self.kind, u)?;
        self.graph.check_update(u)?;
        let pairs = update_svd_for_graph(&mut self.svd, &self.graph, u, self.kind)?;
        self.graph.apply_update(u)?;
        Ok(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::IncidentEdge;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_matches_oracle(s: &SvdState, m: &DenseMatrix, tol: f64) {
        let o = oracle::oracle_truncated_svd(m, s.rank_cap().unwrap_or(usize::MAX), 1e-12).unwrap();
        assert_eq!(s.rank(), o.sigma.len(), "{} vs {}", s.sigma(), o.sigma);
        assert!(
            (s.sigma() - &o.sigma).amax() <= tol,
            "{} vs {}",
            s.sigma(),
            o.sigma
        );
    }

    #[test]
    fn scratch_examples() {
        let s = SvdState::from_matrix(&dmatrix![3.0, 0.0; 0.0, 1.0], None).unwrap();
        assert_eq!(s.sigma().as_slice(), &[3.0, 1.0]);
        assert!((s.u() - DenseMatrix::identity(2, 2)).norm() < 1e-15);

        let s = SvdState::from_matrix(&DenseMatrix::zeros(3, 2), None).unwrap();
        assert_eq!(s.rank(), 0);
        assert_eq!(s.shape(), (3, 2));

        let u = Vector::from_vec(vec![2.0, 0.0, 0.0]);
        let v = Vector::from_vec(vec![0.6, 0.8]);
        let s = SvdState::from_matrix(&(&u * v.transpose()), None).unwrap();
        assert_eq!(s.rank(), 1);
        assert!((s.sigma()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_examples() {
        let mut s = SvdState::from_matrix(&dmatrix![3.0, 0.0; 0.0, 1.0], None).unwrap();
        s.rank1_update(&unit(2, 0), &unit(2, 0)).unwrap();
        assert!((s.sigma() - Vector::from_vec(vec![4.0, 1.0])).amax() < 1e-14);

        let before = s.clone();
        s.rank1_update(&Vector::zeros(2), &unit(2, 1)).unwrap();
        assert_eq!(s.sigma(), before.sigma());
    }

    #[test]
    fn random_rank_one_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let m = DenseMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
            let (c, d) = (rand_vec(&mut rng, 8), rand_vec(&mut rng, 8));
            let mut s = SvdState::from_matrix(&m, None).unwrap();
            s.rank1_update(&c, &d).unwrap();
            let target = &m + &c * d.transpose();
            assert!((s.low_rank_approx() - &target).norm() <= 1e-9 * target.norm());
            assert_matches_oracle(&s, &target, 1e-9);
        }
    }

    #[test]
    fn append_examples() {
        let mut s = SvdState::from_matrix(&dmatrix![1.0; 0.0], None).unwrap();
        s.append_column(&Vector::from_vec(vec![0.0, 1.0])).unwrap();
        assert!((s.sigma() - Vector::from_vec(vec![1.0, 1.0])).amax() < 1e-15);

        let mut s = SvdState::from_matrix(&dmatrix![3.0, 0.0; 0.0, 1.0], None).unwrap();
        s.append_column(&Vector::zeros(2)).unwrap();
        assert_eq!(s.sigma().as_slice(), &[3.0, 1.0]);
        assert_eq!(s.v().nrows(), 3);
        assert_eq!(s.v().row(2).amax(), 0.0);
    }

    #[test]
    fn random_appends_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let m = DenseMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
            let a = rand_vec(&mut rng, 6);
            let mut s = SvdState::from_matrix(&m, None).unwrap();
            s.append_column(&a).unwrap();
            let mut target = m.clone().insert_column(5, 0.0);
            target.set_column(5, &a);
            assert_matches_oracle(&s, &target, 1e-9);
            assert!((s.low_rank_approx() - &target).norm() <= 1e-9 * target.norm());

            let r = rand_vec(&mut rng, 6);
            s.append_row(&r).unwrap();
            let mut grown = target.insert_row(6, 0.0);
            grown.set_row(6, &r.transpose());
            assert_matches_oracle(&s, &grown, 1e-9);
        }
    }

    #[test]
    fn truncation_follows_eckart_young() {
        let mut s = SvdState::from_matrix(&dmatrix![3.0, 0.0; 0.0, 1.0], Some(1)).unwrap();
        assert!((s.low_rank_approx() - dmatrix![3.0, 0.0; 0.0, 0.0]).norm() < 1e-15);
        s.rank1_update(&unit(2, 1), &unit(2, 1)).unwrap();
        // diag(3, 0) + e₂e₂ᵀ keeps only the leading triplet
        assert_eq!(s.rank(), 1);
        assert!((s.sigma()[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn graph_examples() {
        let mut gs =
            GraphSvd::new(DynamicGraph::new(2, true), EmbeddingKind::Adjacency, None).unwrap();
        gs.update(&GraphUpdate::EdgeInsert { i: 1, j: 2, w: 2.5 })
            .unwrap();
        assert_eq!(gs.svd().rank(), 1);
        assert!((gs.svd().sigma()[0] - 2.5).abs() < 1e-15);

        let lap = EmbeddingKind::Laplacian { degree_bound: None };
        let mut gs = GraphSvd::new(DynamicGraph::new(2, false), lap, None).unwrap();
        gs.update(&GraphUpdate::EdgeInsert { i: 1, j: 2, w: 1.0 })
            .unwrap();
        assert_eq!(gs.svd().rank(), 1);
        assert!((gs.svd().sigma()[0] - 2.0).abs() < 1e-14);

        let g = DynamicGraph::from_edges(2, true, &[(1, 2, 2.0)]).unwrap();
        let mut gs = GraphSvd::new(g, EmbeddingKind::Adjacency, None).unwrap();
        gs.update(&GraphUpdate::NodeInsert { edges: vec![] })
            .unwrap();
        assert_eq!(gs.svd().shape(), (3, 3));
        assert_eq!(gs.svd().sigma().as_slice(), &[2.0]);
    }

    #[test]
    fn node_deletion_is_rejected() {
        let g = DynamicGraph::from_edges(2, true, &[(1, 2, 2.0)]).unwrap();
        let mut gs = GraphSvd::new(g, EmbeddingKind::Adjacency, None).unwrap();
        assert!(matches!(
            gs.update(&GraphUpdate::NodeDelete { i: 1 }),
            Err(Error::UnsupportedOperation(_))
        ));
        assert_eq!(gs.graph().n(), 2);
    }

    #[test]
    fn laplacian_node_insert_needs_bound() {
        let lap = EmbeddingKind::Laplacian { degree_bound: None };
        let mut gs = GraphSvd::new(DynamicGraph::new(2, false), lap, None).unwrap();
        let u = GraphUpdate::NodeInsert {
            edges: vec![IncidentEdge::out(1, 1.0)],
        };
        assert!(matches!(
            gs.update(&u),
            Err(Error::IncompatibleEmbedding(_))
        ));
    }

    #[test]
    fn update_cost_scales_with_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (n, k) = (200, 6);
        let a = DenseMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let b = DenseMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
        let mut s = SvdState::from_matrix(&(a * b), Some(k)).unwrap();
        let (c, d) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
        let (_, spent) = cost::measure(|| s.rank1_update(&c, &d).unwrap());
        // projections, residuals and two basis rotations
        assert!(
            spent.flops <= (12 * n * (k + 1) * (k + 1)) as u64,
            "{spent:?}"
        );
    }
}
