use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    /// R² needs a non-constant label vector.
    #[error("R² is undefined for a constant label vector")]
    UndefinedR2,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{} sample(s) failed, first at index {}: {}", .0.len(), .0[0].0, .0[0].1)]
    SampleFailures(Vec<(usize, String)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ResourceLimit(_) => "resource_limit",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::InternalConsistency(_) => "internal_consistency",
            Error::UndefinedR2 => "undefined_r2",
            Error::Parse { .. } => "parse",
            Error::Integrity(_) => "integrity",
            Error::SampleFailures(_) => "sample_failures",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Linalg(_) => "linalg",
        }
    }
}
