use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation (negative time, ...).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Validation(String),
    /// Quadrature or optimizer failed to reach its tolerance.
    #[error("numerical failure: {message} (estimate {estimate:e}, error {error:e}, tolerance {tolerance:e})")]
    Quadrature {
        message: String,
        estimate: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    /// A statistic whose defining ratio has an empty denominator.
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("no optimal ordering exists for a family-D model (preference cycles)")]
    NoOptimalOrdering,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
