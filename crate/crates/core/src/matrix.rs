//! Dense matrix and vector types plus their text format.
//!
//! ```text
//! matrix <rows> <cols>
//! <row 1 entries>
//! ...
//! vector <len>
//! <entries, any whitespace layout>
//! ```
//!
//! Entries are written with the shortest decimal representation that
//! round-trips to the same `f64`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::cost;
use crate::error::{Error, Result};
use crate::text::Lines;

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `e_i` of length `len` (0-based `i`).
pub fn unit(len: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(len);
    e[i] = 1.0;
    e
}

pub fn is_finite(m: &DenseMatrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `a · x`, counted as `rows·cols` multiply-adds.
pub(crate) fn mul_vec(a: &DenseMatrix, x: &Vector) -> Vector {
    cost::add_flops(a.nrows() * a.ncols());
    a * x
}

/// `aᵀ · x`, counted as `rows·cols` multiply-adds.
pub(crate) fn tr_mul_vec(a: &DenseMatrix, x: &Vector) -> Vector {
    cost::add_flops(a.nrows() * a.ncols());
    a.tr_mul(x)
}

/// `a += alpha · x · yᵀ`.
pub(crate) fn add_outer(a: &mut DenseMatrix, alpha: f64, x: &Vector, y: &Vector) {
    cost::add_flops(a.nrows() * a.ncols());
    a.ger(alpha, x, y, 1.0);
}

/// Matrix-matrix product with both operands non-degenerate; recorded
/// separately so the rank-one paths can assert they never do this.
pub(crate) fn mat_mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    if a.nrows() > 1 && a.ncols() > 1 && b.ncols() > 1 {
        cost::add_matmul();
    }
    cost::add_flops(a.nrows() * a.ncols() * b.ncols());
    a * b
}

pub fn write_matrix(out: &mut String, m: &DenseMatrix) {
    let _ = writeln!(out, "matrix {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn write_vector(out: &mut String, v: &Vector) {
    let _ = writeln!(out, "vector {}", v.len());
    let entries: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    let _ = writeln!(out, "{}", entries.join(" "));
}

pub fn matrix_to_string(m: &DenseMatrix) -> String {
    let mut s = String::new();
    write_matrix(&mut s, m);
    s
}

pub fn vector_to_string(v: &Vector) -> String {
    let mut s = String::new();
    write_vector(&mut s, v);
    s
}

/// Reads `count` numbers that may be spread over several lines.
fn read_numbers(lines: &mut Lines<'_>, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    while values.len() < count {
        let line = lines.require(what)?;
        for idx in 0..line.tokens.len() {
            if values.len() == count {
                return Err(Error::parse(
                    line.number,
                    format!("too many entries for {what}"),
                ));
            }
            let v: f64 = line.field(idx)?;
            if !v.is_finite() {
                return Err(Error::parse(line.number, "non-finite entry"));
            }
            values.push(v);
        }
    }
    Ok(values)
}

pub fn read_matrix(lines: &mut Lines<'_>) -> Result<DenseMatrix> {
    let header = lines.require("matrix header")?;
    header.expect_keyword("matrix")?;
    header.expect_len(3)?;
    let rows: usize = header.field(1)?;
    let cols: usize = header.field(2)?;
    let mut m = DenseMatrix::zeros(rows, cols);
    if cols == 0 {
        return Ok(m);
    }
    for i in 0..rows {
        let line = lines.require("matrix row")?;
        if line.tokens.len() != cols {
            return Err(Error::parse(
                line.number,
                format!("row has {} entries, expected {cols}", line.tokens.len()),
            ));
        }
        for j in 0..cols {
            let v: f64 = line.field(j)?;
            if !v.is_finite() {
                return Err(Error::parse(line.number, "non-finite entry"));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

pub fn read_vector(lines: &mut Lines<'_>) -> Result<Vector> {
    let header = lines.require("vector header")?;
    header.expect_keyword("vector")?;
    header.expect_len(2)?;
    let len: usize = header.field(1)?;
    Ok(Vector::from_vec(read_numbers(lines, len, "vector")?))
}

pub fn parse_matrix(src: &str) -> Result<DenseMatrix> {
    let mut lines = Lines::new(src);
    let m = read_matrix(&mut lines)?;
    if let Some(extra) = lines.next() {
        return Err(Error::parse(extra.number, "trailing content after matrix"));
    }
    Ok(m)
}

pub fn parse_vector(src: &str) -> Result<Vector> {
    let mut lines = Lines::new(src);
    let v = read_vector(&mut lines)?;
    if let Some(extra) = lines.next() {
        return Err(Error::parse(extra.number, "trailing content after vector"));
    }
    Ok(v)
}
