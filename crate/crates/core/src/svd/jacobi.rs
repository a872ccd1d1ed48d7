// One-sided (Hestenes) Jacobi SVD for the small square core matrices that
// the incremental update diagonalizes. Columns of A·V are orthogonalized
// by plane rotations; their norms are the singular values.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};

const MAX_SWEEPS: usize = 60;

/// Returns `(U, sigma, V)` with `A = U·diag(sigma)·Vᵀ`, `sigma` sorted in
/// decreasing order. Columns of `U` belonging to zero singular values are
/// left at zero.
pub(crate) fn jacobi_svd(a: &DenseMatrix) -> Result<(DenseMatrix, Vector, DenseMatrix)> {
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(cols, cols);
    // columns this small carry no information at working precision
    let tiny = (f64::EPSILON * a.norm()).powi(2);
    let tol = f64::EPSILON * rows.max(1) as f64;
    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                    || alpha.min(beta) <= tiny
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::ConvergenceFailure(MAX_SWEEPS));
    }

    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let k = rows.min(cols);
    let mut u = DenseMatrix::zeros(rows, k);
    let mut sv = DenseMatrix::zeros(cols, k);
    let mut sigma = Vector::zeros(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        sigma[dst] = norms[src];
        if norms[src] > 0.0 {
            u.set_column(dst, &(w.column(src) / norms[src]));
        }
        sv.set_column(dst, &v.column(src));
    }
    Ok((u, sigma, sv))
}
