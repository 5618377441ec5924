use thiserror::Error;

/// Errors raised by the numerical, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("{what} did not converge (achieved error estimate {estimate:e})")]
    Convergence { what: &'static str, estimate: f64 },

    #[error("interferer scales {0} and {1} are not distinct (relative separation below 1e-9)")]
    Distinctness(f64, f64),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("closed form lost too much precision (estimated relative error {estimate:e})")]
    Cancellation { estimate: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Error {
    Error::Domain { func, msg: msg.into() }
}
