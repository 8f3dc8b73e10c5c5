use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("point outside the system domain: {0}")]
    OutOfDomain(String),
    #[error("coding failure: {0}")]
    Coding(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty ball around query (nearest occupied radius {nearest:.6e})")]
    EmptyBall { nearest: f64 },
    #[error("empty slab")]
    EmptySlab,
    #[error("too few samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
