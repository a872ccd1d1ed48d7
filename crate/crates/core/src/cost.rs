//! Arithmetic-cost instrumentation for the incremental engines.
//!
//! Every dense kernel used by the pseudoinverse and SVD engines reports
//! the number of multiply-adds it performs, and matrix-matrix products
//! are tallied separately. Counters are per thread.

use std::cell::Cell;

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
    static MATMULS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostSnapshot {
    pub flops: u64,
    pub matmuls: u64,
}

impl std::ops::Sub for CostSnapshot {
    type Output = CostSnapshot;

    fn sub(self, rhs: CostSnapshot) -> CostSnapshot {
        CostSnapshot {
            flops: self.flops - rhs.flops,
            matmuls: self.matmuls - rhs.matmuls,
        }
    }
}

pub(crate) fn add_flops(n: usize) {
    FLOPS.with(|c| c.set(c.get() + n as u64));
}

pub(crate) fn add_matmul() {
    MATMULS.with(|c| c.set(c.get() + 1));
}

pub fn snapshot() -> CostSnapshot {
    CostSnapshot {
        flops: FLOPS.with(Cell::get),
        matmuls: MATMULS.with(Cell::get),
    }
}

/// Runs `f` and returns its result with the cost it incurred.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, CostSnapshot) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}
