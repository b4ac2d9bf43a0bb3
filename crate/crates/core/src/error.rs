//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible operand shapes for a tensor op.
    #[error("shape mismatch in `{op}`: lhs {lhs:?}, rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Generic dimension/size violation outside the tensor ops.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// `backward` invoked a second time on the same graph without a reset.
    #[error("backward already ran on this graph; reset gradients before calling again")]
    BackwardAlreadyRun,

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown parameter `{0}` in store")]
    UnknownParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
