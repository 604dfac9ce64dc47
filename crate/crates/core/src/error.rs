use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate event: {0}")]
    Degenerate(String),
    #[error("state space too large: {states} states exceeds limit {limit}")]
    TooLarge { states: u128, limit: u128 },
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("kernel is not ergodic: {0}")]
    NonErgodic(String),
    #[error("event-rate bound violated: rate {rate} exceeds bound {bound}")]
    RateBound { rate: f64, bound: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_state(msg: impl Into<String>) -> Error {
    Error::InvalidState(msg.into())
}
