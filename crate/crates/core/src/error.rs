use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decision engine and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the set an operation is defined on.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A forecast outside the choice-function domain of the game.
    #[error("forecast (p={p}, q={q}) outside the {domain} domain")]
    ForecastDomain {
        p: f64,
        q: f64,
        domain: &'static str,
    },

    /// A comparator whose decision rule leaves the decision set on the run's data.
    #[error("rejected comparator: {0}")]
    RejectedComparator(String),

    /// An API call made out of protocol order.
    #[error("usage error: {0}")]
    Usage(String),

    /// The root finder exhausted its bracket cascade.
    #[error("root finder failed at round {round}: {diagnostics}")]
    RootNotFound { round: usize, diagnostics: String },

    /// A quadratic form that should be non-negative came out negative.
    #[error("kernel is not positive definite: quadratic form {0}")]
    NotPositiveDefinite(f64),

    #[error("no {kind} registered under the name {name:?}")]
    UnknownName { kind: &'static str, name: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
