// Dense-tableau simplex for min ‖M·x − b‖₁, written independently of the
// warm-started solver in `l1`: free variables are split (x = x⁺ − x⁻),
// the whole tableau is carried explicitly, and Bland's rule is used from
// the first pivot so termination never depends on a stall heuristic.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

/// Returns `(x, objective)` for `argmin_x ‖M·x − b‖₁`.
pub fn oracle_l1(m: &DenseMatrix, b: &Vector) -> Result<(Vector, f64)> {
    let (rows, cols) = m.shape();
    if b.len() != rows {
        return Err(Error::shape(rows, b.len()));
    }
    // columns: x⁺ (cols), x⁻ (cols), u (rows), v (rows), rhs
    let width = 2 * cols + 2 * rows;
    let mut t = vec![vec![0.0; width + 1]; rows];
    let mut basis = vec![0usize; rows];
    for i in 0..rows {
        let s = if b[i] >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..cols {
            t[i][j] = s * m[(i, j)];
            t[i][cols + j] = -s * m[(i, j)];
        }
        t[i][2 * cols + i] = s;
        t[i][2 * cols + rows + i] = -s;
        t[i][width] = s * b[i];
        basis[i] = if s > 0.0 {
            2 * cols + i
        } else {
            2 * cols + rows + i
        };
    }
    let cost = |j: usize| if j >= 2 * cols { 1.0 } else { 0.0 };
    let mut z: Vec<f64> = (0..=width)
        .map(|j| {
            let base = if j < width { cost(j) } else { 0.0 };
            base - (0..rows).map(|i| t[i][j]).sum::<f64>()
        })
        .collect();

    let mut pivots = 0;
    while let Some(q) = (0..width).find(|&j| z[j] < -PIVOT_EPS) {
        let mut leave: Option<usize> = None;
        for i in 0..rows {
            if t[i][q] > PIVOT_EPS {
                let ratio = t[i][width] / t[i][q];
                leave = match leave {
                    None => Some(i),
                    Some(p) => {
                        let best = t[p][width] / t[p][q];
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[p]) {
                            Some(i)
                        } else {
                            Some(p)
                        }
                    }
                };
            }
        }
        let Some(p) = leave else {
            // the objective is bounded below by zero
            return Err(Error::ConvergenceFailure(pivots));
        };
        let piv = t[p][q];
        for v in t[p].iter_mut() {
            *v /= piv;
        }
        let prow = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != p && row[q] != 0.0 {
                let f = row[q];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        let f = z[q];
        for (v, pv) in z.iter_mut().zip(&prow) {
            *v -= f * pv;
        }
        basis[p] = q;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::ConvergenceFailure(pivots));
        }
    }

    let mut x = Vector::zeros(cols);
    for (i, &var) in basis.iter().enumerate() {
        if var < cols {
            x[var] += t[i][width];
        } else if var < 2 * cols {
            x[var - cols] -= t[i][width];
        }
    }
    let objective = (m * &x - b).abs().sum();
    Ok((x, objective))
}
