use thiserror::Error;

/// Errors raised by tensor arithmetic, layers and the model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape {0:?}: dimensions must be non-empty and positive")]
    InvalidShape(Vec<usize>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid range: lo {lo} must be below hi {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("degenerate batch: batch norm needs more than one element per channel, got {0}")]
    DegenerateBatch(usize),
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("corrupt cache: {0}")]
    CorruptCache(String),
    #[error("invalid dropout probability {0}: must satisfy 0 <= p < 1")]
    InvalidProbability(f64),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
