use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The sweep carried no present samples, so no observation can be formed.
    #[error("sweep has no present samples")]
    NoObservation,

    #[error("trace bank is empty")]
    EmptyBank,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("illegal ranging transition: {event} in state {state}")]
    IllegalTransition { state: String, event: String },

    /// Every orientation of a ranging sweep failed.
    #[error("ranging sweep produced no valid measurement")]
    RangingFailure,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
