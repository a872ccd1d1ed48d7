//! From-scratch reference computations.
//!
//! Nothing here shares arithmetic with the incremental engines: the dense
//! SVD and pseudoinverse run on `faer`, and the least-absolute-deviation
//! solver is a separate dense-tableau simplex with Bland's rule
//! (see [`lp`]). Agreement between an engine and the oracle is therefore
//! evidence rather than a tautology.

mod lp;

pub use lp::oracle_l1;

use faer::Mat;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};

/// Singular values at or below `PINV_CUTOFF · σ₁` are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Thin SVD `M = U · diag(sigma) · Vᵀ` with `min(n, m)` triplets.
#[derive(Debug, Clone)]
pub struct OracleSvd {
    pub u: DenseMatrix,
    pub sigma: Vector,
    pub v: DenseMatrix,
}

impl OracleSvd {
    /// Number of singular values above `rel_tol · σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let Some(&top) = self.sigma.as_slice().first() else {
            return 0;
        };
        self.sigma
            .iter()
            .filter(|&&s| s > rel_tol * top && s > 0.0)
            .count()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn to_faer(m: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Flips column signs so the first significant entry of each left
/// singular vector is nonnegative.
fn normalize_signs(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    for j in 0..u.ncols() {
        let col = u.column(j);
        let peak = col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                u.column_mut(j).neg_mut();
                v.column_mut(j).neg_mut();
            }
        }
    }
}

pub fn oracle_svd(m: &DenseMatrix) -> Result<OracleSvd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(OracleSvd {
            u: DenseMatrix::zeros(rows, 0),
            sigma: Vector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|_| Error::ConvergenceFailure(100 * k))?;
    let mut u = from_faer(svd.U());
    let mut v = from_faer(svd.V());
    let s = svd.S().column_vector();
    let sigma = Vector::from_fn(k, |i, _| s[i]);
    normalize_signs(&mut u, &mut v);
    Ok(OracleSvd { u, sigma, v })
}

/// `V · Σ† · Uᵀ` with the [`PINV_CUTOFF`] rank rule.
pub fn oracle_pinv(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Ok(DenseMatrix::zeros(cols, rows));
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|_| Error::ConvergenceFailure(100 * rows.min(cols)))?;
    let s = svd.S().column_vector();
    let cutoff = PINV_CUTOFF * s[0];
    let rank = (0..s.nrows())
        .filter(|&i| s[i] > cutoff && s[i] > 0.0)
        .count();
    let v = svd.V().subcols(0, rank);
    let u = svd.U().subcols(0, rank);
    let vs = Mat::from_fn(cols, rank, |i, j| v[(i, j)] / s[j]);
    let p = &vs * u.transpose();
    Ok(from_faer(p.as_ref()))
}

/// Minimum-norm least-squares solution `M† · b`.
pub fn oracle_lstsq(m: &DenseMatrix, b: &Vector) -> Result<Vector> {
    if b.len() != m.nrows() {
        return Err(Error::shape(m.nrows(), b.len()));
    }
    Ok(oracle_pinv(m)? * b)
}

/// Truncated SVD keeping at most `rank` triplets above the cutoff.
pub fn oracle_truncated_svd(m: &DenseMatrix, rank: usize, rel_tol: f64) -> Result<OracleSvd> {
    let full = oracle_svd(m)?;
    let k = full.rank(rel_tol).min(rank);
    Ok(OracleSvd {
        u: full.u.columns(0, k).into_owned(),
        sigma: full.sigma.rows(0, k).into_owned(),
        v: full.v.columns(0, k).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_of_diagonal() {
        let s = oracle_svd(&dmatrix![3.0, 0.0; 0.0, 1.0]).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-15 && (s.sigma[1] - 1.0).abs() < 1e-15);
        assert!((s.u.clone() - DenseMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn svd_of_empty_and_zero() {
        assert_eq!(
            oracle_svd(&DenseMatrix::zeros(0, 3)).unwrap().sigma.len(),
            0
        );
        let z = oracle_svd(&DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(z.rank(1e-12), 0);
    }

    #[test]
    fn svd_self_consistency_12x7() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DenseMatrix::from_fn(12, 7, |_, _| rng.random_range(-1.0..1.0));
        let s = oracle_svd(&m).unwrap();
        let eye = DenseMatrix::identity(7, 7);
        assert!((s.u.transpose() * &s.u - &eye).norm() < 1e-11);
        assert!((s.v.transpose() * &s.v - &eye).norm() < 1e-11);
        assert!((s.reconstruct() - &m).norm() <= 1e-11 * m.norm());
        assert!(s.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_cases() {
        let eye = DenseMatrix::identity(3, 3);
        assert!((oracle_pinv(&eye).unwrap() - &eye).norm() < 1e-14);
        assert_eq!(
            oracle_pinv(&DenseMatrix::zeros(2, 3)).unwrap(),
            DenseMatrix::zeros(3, 2)
        );
        // rank one: [[1,2],[2,4]] = 5 · u·uᵀ, pinv = uuᵀ/5 = M/25
        let m = dmatrix![1.0, 2.0; 2.0, 4.0];
        let expected = &m / 25.0;
        assert!((oracle_pinv(&m).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn pinv_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DenseMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DenseMatrix::from_fn(3, 6, |_, _| rng.random_range(-1.0..1.0));
        let m = a * b; // rank 3, 9x6
        let p = oracle_pinv(&m).unwrap();
        let scale = m.norm() * p.norm();
        assert!((&m * &p * &m - &m).norm() <= 1e-10 * m.norm());
        assert!((&p * &m * &p - &p).norm() <= 1e-10 * p.norm());
        let mp = &m * &p;
        let pm = &p * &m;
        assert!((&mp - mp.transpose()).norm() <= 1e-10 * scale);
        assert!((&pm - pm.transpose()).norm() <= 1e-10 * scale);
    }

    #[test]
    fn lstsq_minimum_norm() {
        let m = dmatrix![0.0, 1.0; 0.0, 0.0];
        let x = oracle_lstsq(&m, &Vector::from_vec(vec![3.0, 5.0])).unwrap();
        assert_eq!(x, Vector::from_vec(vec![0.0, 3.0]));
    }
}
