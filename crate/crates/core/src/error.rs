use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point budget exceeded: {requested} points requested, budget is {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient samples at epsilon = {epsilon}: Monte Carlo estimate is zero")]
    InsufficientSamples { epsilon: f64 },

    #[error("could not place a non-duplicate point after {attempts} attempts (point index {index})")]
    DuplicateRetryExhausted { index: usize, attempts: usize },

    #[error("no viable projection: all {trials} trials produced absent scores")]
    NoViableProjection {
        trials: usize,
        reports: Vec<crate::projector::SeparationReport>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
