use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("row {row} of the transition matrix sums to {sum} (expected 1)")]
    RowSum { row: usize, sum: f64 },

    #[error("negative or non-finite transition probability {value} at ({row}, {col})")]
    BadEntry { row: usize, col: usize, value: f64 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("prior sums to {sum} (expected 1)")]
    PriorSum { sum: f64 },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("Poisson tail mass {mass:e} beyond y_max exceeds {tolerance:e} for input {input}")]
    TailMass { input: f64, mass: f64, tolerance: f64 },

    #[error("Blahut-Arimoto did not converge in {iterations} iterations (bracket width {width:e})")]
    NotConverged { iterations: usize, width: f64 },

    #[error("super-alphabet too large: {size} exceeds limit {limit}")]
    SuperAlphabetOverflow { size: usize, limit: usize },

    #[error("confidence interval width {width:e} exceeds tolerance {tolerance:e}; more samples needed")]
    InsufficientSamples { width: f64, tolerance: f64 },

    #[error("lower bound {lower} exceeds upper bound {upper}")]
    BoundOrder { lower: f64, upper: f64 },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
