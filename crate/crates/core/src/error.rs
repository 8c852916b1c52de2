use thiserror::Error;

/// Errors produced by the thermometry library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or iterative solve did not converge.
    #[error("numerical error: {message} (last estimate {estimate:e}, last change {change:e}, nodes {nodes})")]
    Numerical {
        message: String,
        estimate: f64,
        change: f64,
        nodes: usize,
    },

    /// A search (crossing, bracket) found nothing within the available range.
    #[error("not found: {0}")]
    NotFound(String),

    /// The request exceeds a hard capacity limit (e.g. exact path-sum size).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The model assumptions are violated (e.g. a covariance is not PSD).
    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The likelihood carries no information about the parameter.
    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    /// A required upstream quantity is unavailable.
    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
