//! Moore–Penrose pseudoinverse maintenance.
//!
//! [`PinvState`] carries an `n × m` matrix `M` together with `M†` and keeps
//! the pair consistent under
//!
//! * rank-one modifications `M + c·dᵀ` (Meyer's six-case update),
//! * appending a column or a row (Greville's recursion and its transpose),
//! * removing the last column or row (Greville run backwards),
//! * swapping row/column `i` with the last one.
//!
//! Each of these costs `O(n·m)` arithmetic. Zero tests on residual vectors
//! use a scaled threshold `tol · (1 + ‖generator‖)` with
//! `tol = 1e-12 · max(n, m)`. Every step is followed by an `O(n·m)` probe
//! of the Penrose conditions; if a relative probe residual exceeds `tol`
//! the pseudoinverse is recomputed from scratch. On random update
//! sequences this happens on a few percent of steps, mostly when the
//! matrix is poorly conditioned.

use crate::embedding::{DeltaStep, EmbeddingDelta};
use crate::error::{Error, Result};
use crate::matrix::{add_outer, mul_vec, tr_mul_vec, DenseMatrix, Vector};
use crate::oracle;

/// Largest relative Penrose residual accepted for a state assembled from
/// stored parts.
pub const GUARD_THRESHOLD: f64 = 1e-9;

/// Which of Meyer's cases a rank-one update went through.
///
/// `u = (I − M·M†)·c`, `v = (I − M†·M)ᵀ·d`, `β = 1 + dᵀ·M†·c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneCase {
    /// `c = 0` or `d = 0`; nothing to do.
    Trivial,
    /// `u ≠ 0`, `v ≠ 0`.
    BothOutside,
    /// `u = 0`, `v ≠ 0`, `β = 0`.
    ColumnInsideSingular,
    /// `u = 0`, `β ≠ 0`.
    ColumnInside,
    /// `u ≠ 0`, `v = 0`, `β = 0`.
    RowInsideSingular,
    /// `v = 0`, `β ≠ 0` (and `u ≠ 0`).
    RowInside,
    /// `u = 0`, `v = 0`, `β = 0`: the rank drops.
    BothInsideSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenroseResiduals {
    /// `‖M·M†·M − M‖ / ‖M‖`
    pub mpm: f64,
    /// `‖M†·M·M† − M†‖ / ‖M†‖`
    pub pmp: f64,
    /// `‖M·M† − (M·M†)ᵀ‖ / (‖M‖·‖M†‖)`
    pub mp_sym: f64,
    /// `‖M†·M − (M†·M)ᵀ‖ / (‖M‖·‖M†‖)`
    pub pm_sym: f64,
}

impl PenroseResiduals {
    pub fn max(&self) -> f64 {
        self.mpm.max(self.pmp).max(self.mp_sym).max(self.pm_sym)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineStats {
    pub rank_one_updates: usize,
    pub appends: usize,
    pub removals: usize,
    pub permutations: usize,
    /// Times a from-scratch recomputation replaced an incremental result.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct PinvState {
    m: DenseMatrix,
    mdag: DenseMatrix,
    tol: f64,
    guard_every_step: bool,
    stats: EngineStats,
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Deterministic probe vector with entries in `[-1, 1]`.
fn probe(len: usize, salt: u64) -> Vector {
    Vector::from_fn(len, |i, _| {
        let mut z = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
}

impl PinvState {
    pub fn default_tol(rows: usize, cols: usize) -> f64 {
        1e-12 * rows.max(cols).max(1) as f64
    }

    /// Pseudoinverse from a full SVD.
    pub fn from_matrix(m: DenseMatrix) -> Result<Self> {
        if !crate::matrix::is_finite(&m) {
            return Err(Error::InvalidWeight(f64::NAN));
        }
        let mdag = oracle::oracle_pinv(&m)?;
        let tol = Self::default_tol(m.nrows(), m.ncols());
        Ok(PinvState {
            m,
            mdag,
            tol,
            guard_every_step: true,
            stats: EngineStats::default(),
        })
    }

    /// Rebuilds a state from stored parts, re-verifying the Penrose
    /// conditions.
    pub fn from_parts(m: DenseMatrix, mdag: DenseMatrix, tol: f64) -> Result<Self> {
        if mdag.shape() != (m.ncols(), m.nrows()) {
            return Err(Error::shape(
                format!("{}x{}", m.ncols(), m.nrows()),
                format!("{}x{}", mdag.nrows(), mdag.ncols()),
            ));
        }
        let s = PinvState {
            m,
            mdag,
            tol,
            guard_every_step: true,
            stats: EngineStats::default(),
        };
        let r = s.penrose_residuals();
        if r.max() > GUARD_THRESHOLD {
            return Err(Error::Verification(format!(
                "Penrose residual {:.3e} exceeds {GUARD_THRESHOLD:e}",
                r.max()
            )));
        }
        Ok(s)
    }

    /// Probe the Penrose conditions after rank-one updates and appends as
    /// well as after downdates (the default). Without it, error carried over
    /// from earlier steps can flip a zero test and the next update divides
    /// by a residual that should have been zero.
    pub fn with_step_guard(mut self, on: bool) -> Self {
        self.guard_every_step = on;
        self
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    /// For ulp-level corrections of `M` that leave `M†` valid.
    pub(crate) fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.m
    }

    pub fn pinv(&self) -> &DenseMatrix {
        &self.mdag
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    fn negligible(&self, r: &Vector, generator: f64) -> bool {
        r.norm() <= self.tol * (1.0 + generator)
    }

    fn refresh_tol(&mut self) {
        self.tol = Self::default_tol(self.m.nrows(), self.m.ncols());
    }

    /// Recomputes `M†` from scratch.
    pub fn recompute(&mut self) -> Result<()> {
        self.mdag = oracle::oracle_pinv(&self.m)?;
        self.stats.fallbacks += 1;
        Ok(())
    }

    /// Exact Penrose residuals (cubic cost; for verification).
    pub fn penrose_residuals(&self) -> PenroseResiduals {
        let m = &self.m;
        let p = &self.mdag;
        let (nm, np) = (m.norm(), p.norm());
        let mp = m * p;
        let pm = p * m;
        PenroseResiduals {
            mpm: safe_ratio((&mp * m - m).norm(), nm),
            pmp: safe_ratio((&pm * p - p).norm(), np),
            mp_sym: safe_ratio((&mp - mp.transpose()).norm(), nm * np),
            pm_sym: safe_ratio((&pm - pm.transpose()).norm(), nm * np),
        }
    }

    /// Penrose residuals estimated from one probe vector per side, at
    /// `O(n·m)` cost. The first two are scaled by the image of the probe,
    /// the symmetry conditions by `‖M‖_F·‖M†‖_F` as in
    /// [`Self::penrose_residuals`], so each approximates a relative error
    /// of `M†`.
    pub fn probe_residuals(&self) -> PenroseResiduals {
        let (rows, cols) = self.m.shape();
        if rows == 0 || cols == 0 {
            return PenroseResiduals::default();
        }
        let m = &self.m;
        let p = &self.mdag;
        let z = probe(cols, 0x5EED);
        let w = probe(rows, 0xFACE);
        let mz = mul_vec(m, &z);
        let pw = mul_vec(p, &w);
        let r1 = mul_vec(m, &mul_vec(p, &mz)) - &mz;
        let r2 = mul_vec(p, &mul_vec(m, &pw)) - &pw;
        let r3 = tr_mul_vec(p, &tr_mul_vec(m, &w)) - mul_vec(m, &pw);
        let r4 = tr_mul_vec(m, &tr_mul_vec(p, &z)) - mul_vec(p, &mz);
        let scale = m.norm() * p.norm();
        PenroseResiduals {
            mpm: safe_ratio(r1.norm(), mz.norm()),
            pmp: safe_ratio(r2.norm(), pw.norm()),
            mp_sym: safe_ratio(r3.norm(), w.norm() * scale),
            pm_sym: safe_ratio(r4.norm(), z.norm() * scale),
        }
    }

    fn checked(&mut self) -> Result<()> {
        if self.guard_every_step {
            self.guard()?;
        }
        Ok(())
    }

    fn guard(&mut self) -> Result<bool> {
        if self.probe_residuals().max() > self.tol {
            self.recompute()?;
            return Ok(true);
        }
        Ok(false)
    }

    /// `M ← M + c·dᵀ` and `M† ← (M + c·dᵀ)†`.
    pub fn rank1_update(&mut self, c: &Vector, d: &Vector) -> Result<RankOneCase> {
        let (rows, cols) = self.m.shape();
        if c.len() != rows {
            return Err(Error::shape(rows, c.len()));
        }
        if d.len() != cols {
            return Err(Error::shape(cols, d.len()));
        }
        self.stats.rank_one_updates += 1;
        let (cn, dn) = (c.norm(), d.norm());
        if cn == 0.0 || dn == 0.0 {
            return Ok(RankOneCase::Trivial);
        }

        let k = mul_vec(&self.mdag, c); // M†c, length m
        let h = tr_mul_vec(&self.mdag, d); // (dᵀM†)ᵀ, length n
        let u = c - mul_vec(&self.m, &k);
        let v = d - tr_mul_vec(&self.m, &h);
        let beta = 1.0 + d.dot(&k);
        let u_zero = self.negligible(&u, cn);
        let v_zero = self.negligible(&v, dn);
        let beta_zero = beta.abs() <= self.tol * (1.0 + dn * k.norm());

        let p = &mut self.mdag;
        let case = if !u_zero && !v_zero {
            let uu = u.norm_squared();
            let vv = v.norm_squared();
            // M† − k·u† − v†·h + β·v†·u†
            add_outer(p, -1.0 / uu, &k, &u);
            add_outer(p, -1.0 / vv, &v, &h);
            add_outer(p, beta / (uu * vv), &v, &u);
            RankOneCase::BothOutside
        } else if u_zero && !v_zero && beta_zero {
            let kk = k.norm_squared();
            let vv = v.norm_squared();
            let kp = tr_mul_vec(p, &k); // (kᵀM†)ᵀ
                                        // M† − k·k†·M† − v†·h
            add_outer(p, -1.0 / kk, &k, &kp);
            add_outer(p, -1.0 / vv, &v, &h);
            RankOneCase::ColumnInsideSingular
        } else if u_zero && !beta_zero {
            let kk = k.norm_squared();
            let vv = v.norm_squared();
            let kp = tr_mul_vec(p, &k);
            let sigma = kk * vv + beta * beta;
            // M† + (1/β)·v·kᵀM† − (β/σ)·p1·q1ᵀ with p1 = −(‖k‖²/β)·v − k and
            // q1 = −(‖v‖²/β)·(kᵀM†)ᵀ − h, expanded so the two O(1/β) terms
            // cancel analytically instead of in floating point
            let left = &kp * beta - &h * kk;
            let right = &kp * vv + &h * beta;
            add_outer(p, 1.0 / sigma, &v, &left);
            add_outer(p, -1.0 / sigma, &k, &right);
            RankOneCase::ColumnInside
        } else if !u_zero && v_zero && beta_zero {
            let hh = h.norm_squared();
            let uu = u.norm_squared();
            let ph = mul_vec(p, &h); // M†·h
                                     // M† − M†·h†·h − k·u†
            add_outer(p, -1.0 / hh, &ph, &h);
            add_outer(p, -1.0 / uu, &k, &u);
            RankOneCase::RowInsideSingular
        } else if v_zero && !beta_zero {
            let hh = h.norm_squared();
            let uu = u.norm_squared();
            let ph = mul_vec(p, &h);
            let sigma = hh * uu + beta * beta;
            // M† + (1/β)·M†h·uᵀ − (β/σ)·p2·q2ᵀ with p2 = −(‖u‖²/β)·M†h − k and
            // q2 = −(‖h‖²/β)·u − h, expanded as above
            let left = &u * beta - &h * uu;
            let right = &u * hh + &h * beta;
            add_outer(p, 1.0 / sigma, &ph, &left);
            add_outer(p, -1.0 / sigma, &k, &right);
            RankOneCase::RowInside
        } else {
            let kk = k.norm_squared();
            let hh = h.norm_squared();
            let kp = tr_mul_vec(p, &k);
            let ph = mul_vec(p, &h);
            let khp = kp.dot(&h); // kᵀ·M†·h
                                  // M† − k·k†·M† − M†·h†·h + (k†·M†·h†)·k·h
            add_outer(p, -1.0 / kk, &k, &kp);
            add_outer(p, -1.0 / hh, &ph, &h);
            add_outer(p, khp / (kk * hh), &k, &h);
            RankOneCase::BothInsideSingular
        };
        add_outer(&mut self.m, 1.0, c, d);
        self.checked()?;
        Ok(case)
    }

    /// `M ← [M a]` with Greville's column recursion.
    pub fn append_column(&mut self, a: &Vector) -> Result<()> {
        let (rows, cols) = self.m.shape();
        if a.len() != rows {
            return Err(Error::shape(rows, a.len()));
        }
        self.stats.appends += 1;
        let d = mul_vec(&self.mdag, a);
        let c = a - mul_vec(&self.m, &d);
        let f = if !self.negligible(&c, a.norm()) {
            &c / c.norm_squared()
        } else {
            tr_mul_vec(&self.mdag, &d) / (1.0 + d.norm_squared())
        };
        let mut mdag = std::mem::replace(&mut self.mdag, DenseMatrix::zeros(0, 0));
        add_outer(&mut mdag, -1.0, &d, &f);
        let mut mdag = mdag.insert_row(cols, 0.0);
        mdag.set_row(cols, &f.transpose());
        self.mdag = mdag;

        let m = std::mem::replace(&mut self.m, DenseMatrix::zeros(0, 0));
        let mut m = m.insert_column(cols, 0.0);
        m.set_column(cols, a);
        self.m = m;
        self.refresh_tol();
        self.checked()
    }

    /// `M ← [M; aᵀ]`. Runs [`Self::append_column`] on the transposed pair,
    /// so the result is exactly the transpose of the column update on `Mᵀ`.
    pub fn append_row(&mut self, a: &Vector) -> Result<()> {
        let cols = self.m.ncols();
        if a.len() != cols {
            return Err(Error::shape(cols, a.len()));
        }
        self.transpose_in_place();
        let out = self.append_column(a);
        self.transpose_in_place();
        out
    }

    fn transpose_in_place(&mut self) {
        self.m = self.m.transpose();
        self.mdag = self.mdag.transpose();
    }

    /// Drops the last column of `M`, downdating `M†` by reversing
    /// Greville's recursion. Returns whether the result had to be
    /// recomputed from scratch.
    pub fn remove_last_column(&mut self) -> Result<bool> {
        let (rows, cols) = self.m.shape();
        if cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        self.stats.removals += 1;
        let a: Vector = self.m.column(cols - 1).into_owned();
        let f: Vector = self.mdag.row(cols - 1).transpose();
        let m = std::mem::replace(&mut self.m, DenseMatrix::zeros(0, 0)).remove_column(cols - 1);
        let mut g =
            std::mem::replace(&mut self.mdag, DenseMatrix::zeros(0, 0)).remove_row(cols - 1);
        let ff = f.norm_squared();
        if ff > 0.0 && rows > 0 {
            // f ⟂ range(M') exactly when the removed column was independent
            let r = tr_mul_vec(&m, &f);
            if r.norm() <= self.tol * (1.0 + m.norm()) * ff.sqrt() {
                let gf = mul_vec(&g, &f);
                add_outer(&mut g, -1.0 / ff, &gf, &f);
            } else {
                let s = f.dot(&a);
                let d = mul_vec(&g, &a) / (1.0 - s);
                add_outer(&mut g, 1.0, &d, &f);
            }
        }
        self.m = m;
        self.mdag = g;
        self.refresh_tol();
        self.guard()
    }

    /// Drops the last row of `M`; the transposed form of
    /// [`Self::remove_last_column`].
    pub fn remove_last_row(&mut self) -> Result<bool> {
        let (rows, cols) = self.m.shape();
        if rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        self.stats.removals += 1;
        let a: Vector = self.m.row(rows - 1).transpose();
        let f: Vector = self.mdag.column(rows - 1).into_owned();
        let m = std::mem::replace(&mut self.m, DenseMatrix::zeros(0, 0)).remove_row(rows - 1);
        let mut g =
            std::mem::replace(&mut self.mdag, DenseMatrix::zeros(0, 0)).remove_column(rows - 1);
        let ff = f.norm_squared();
        if ff > 0.0 && cols > 0 {
            let r = mul_vec(&m, &f);
            if r.norm() <= self.tol * (1.0 + m.norm()) * ff.sqrt() {
                let gf = tr_mul_vec(&g, &f);
                add_outer(&mut g, -1.0 / ff, &f, &gf);
            } else {
                let s = f.dot(&a);
                let d = tr_mul_vec(&g, &a) / (1.0 - s);
                add_outer(&mut g, 1.0, &f, &d);
            }
        }
        self.m = m;
        self.mdag = g;
        self.refresh_tol();
        self.guard()
    }

    /// Swaps row and column `i` (0-based) with the last row and column of
    /// a square `M`; `(P·M·P)† = P·M†·P`.
    pub fn permute_with_last(&mut self, i: usize) -> Result<()> {
        let (rows, cols) = self.m.shape();
        if rows != cols {
            return Err(Error::shape("square matrix", format!("{rows}x{cols}")));
        }
        if i >= rows {
            return Err(Error::shape(format!("index < {rows}"), i));
        }
        self.stats.permutations += 1;
        let last = rows - 1;
        self.m.swap_rows(i, last);
        self.m.swap_columns(i, last);
        self.mdag.swap_rows(i, last);
        self.mdag.swap_columns(i, last);
        Ok(())
    }

    pub fn apply_step(&mut self, step: &DeltaStep) -> Result<()> {
        match step {
            DeltaStep::ApplyPair(p) => self.rank1_update(&p.c, &p.d).map(drop),
            DeltaStep::AppendColumn(a) => self.append_column(a),
            DeltaStep::AppendRow(a) => self.append_row(a),
            DeltaStep::RemoveLastColumn => self.remove_last_column().map(drop),
            DeltaStep::RemoveLastRow => self.remove_last_row().map(drop),
            DeltaStep::PermuteWithLast(i) => self.permute_with_last(*i),
        }
    }

    pub fn apply_delta(&mut self, delta: &EmbeddingDelta) -> Result<()> {
        delta.steps.iter().try_for_each(|s| self.apply_step(s))
    }

    pub fn transpose(&self) -> PinvState {
        PinvState {
            m: self.m.transpose(),
            mdag: self.mdag.transpose(),
            tol: self.tol,
            guard_every_step: self.guard_every_step,
            stats: self.stats,
        }
    }
}
