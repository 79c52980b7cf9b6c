//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

/// Unified error for configuration, numeric, and I/O failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value violates an invariant (e.g. non-positive power,
    /// pilot frame shorter than required, estimation window exceeding the
    /// coherence time).
    #[error("config error: {0}")]
    Config(String),

    /// An argument to an operation is outside its domain (e.g. a DFT matrix
    /// with more rows than columns, a non-finite angle, an odd-length vector
    /// passed to `complexify`).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The input is degenerate for the requested operation (all-zero matrix
    /// pseudoinverse, zero reference block in an NMSE ratio).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numeric computation failed or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// CLI process exit code: 2 for configuration/usage problems, 3 for
    /// numeric failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_)
            | SimError::InvalidArgument(_)
            | SimError::Io(_)
            | SimError::Json(_) => 2,
            SimError::DimensionMismatch(_)
            | SimError::DegenerateInput(_)
            | SimError::Numeric(_) => 3,
        }
    }
}

pub type SimResult<T> = Result<T, SimError>;
