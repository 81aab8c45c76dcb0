use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A probability-zero configuration (zero vector under the spherical
    /// group, duplicate rows) that the caller has to resolve.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("reference grid violates the fundamental-domain condition: {0}")]
    FundamentalDomain(String),

    #[error("singular or ill-conditioned matrix: {0}")]
    Singular(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical pipeline rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::Degenerate(_))
    }
}
