//! Incremental linear-algebra engines for graphs that change over time.

pub mod checkpoint;
pub mod cost;
pub mod embedding;
pub mod error;
pub mod generate;
pub mod graph;
pub mod l1;
pub mod l2;
pub mod matrix;
pub mod oracle;
pub mod pinv;
pub mod record;
pub mod svd;
pub mod text;

pub use error::{Error, Result};
