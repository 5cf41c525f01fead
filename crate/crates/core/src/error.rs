use thiserror::Error;

use crate::circleflow::CircleTrace;
use crate::syntax::ParseError;

#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("non-finite value while evaluating {context}")]
    NonFinite { context: String },

    #[error("unsupported derivative order: {0}")]
    UnsupportedOrder(String),

    #[error("line element is inadmissible: F(x={x:?}, y={y:?}) = {value}")]
    Inadmissible { x: Vec<f64>, y: Vec<f64>, value: f64 },

    #[error("fundamental tensor is not positive definite at x={x:?}, y={y:?}")]
    NotPositiveDefinite { x: Vec<f64>, y: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration aborted at s = {at}: {reason}")]
    Aborted {
        at: f64,
        reason: String,
        partial: Box<CircleTrace>,
    },

    #[error("adaptive step control gave up after {rejections} rejected steps")]
    StepRejectionOverflow { rejections: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T, E = FinslerError> = std::result::Result<T, E>;
