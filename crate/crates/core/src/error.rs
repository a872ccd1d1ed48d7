use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The update does not fit the current graph (edge already present,
    /// edge missing, node id out of range, duplicate incident edge).
    #[error("update conflict: {0}")]
    UpdateConflict(String),

    /// Weight is zero, NaN or infinite.
    #[error("invalid weight {0}")]
    InvalidWeight(f64),

    #[error("incompatible embedding: {0}")]
    IncompatibleEmbedding(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("cannot remove from an empty matrix")]
    EmptyMatrix,

    #[error("node insertion requires an observation for the new node")]
    MissingObservation,

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error("no convergence after {0} iterations")]
    ConvergenceFailure(usize),

    /// A checkpoint or loaded state failed its consistency checks.
    #[error("state verification failed: {0}")]
    Verification(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
