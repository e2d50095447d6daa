use std::io;

/// Every failure the toolkit can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("matrix is not positive definite: Cholesky pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: {samples} samples for {components} components")]
    InsufficientData { samples: usize, components: usize },

    #[error("invalid mixture dictionary: {0}")]
    InvalidDictionary(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("infeasible budget: total rate {requested} bits/dim is below the label rate; minimum feasible is {minimum} bits/dim")]
    InfeasibleBudget { requested: f64, minimum: f64 },

    #[error("corrupt stream at byte {offset}: {reason}")]
    CorruptStream { offset: usize, reason: String },

    #[error("dictionary checksum mismatch: stream expects {expected:016x}, dictionary has {found:016x}")]
    DictionaryMismatch { expected: u64, found: u64 },

    #[error("malformed record {record}: {reason}")]
    Ingest { record: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptStream {
        offset,
        reason: reason.into(),
    }
}
