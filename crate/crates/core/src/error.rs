//! Error types shared by the fitting pipeline.

use crate::barycentric::BarycentricModel;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input data (CSV syntax, bad numbers).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Data admits no meaningful fit (all-zero responses, empty truncation, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A matrix is too ill-conditioned for the requested operation.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// An iterative numerical routine failed to converge or broke down.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Greedy iteration ran out of test points.
    #[error("test set exhausted: {0}")]
    Saturation(String),

    /// Stability enforcement failed; the last unconstrained model is attached
    /// for diagnosis.
    #[error("stabilization failed: {reason}")]
    Stabilization {
        reason: String,
        model: Box<BarycentricModel>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
