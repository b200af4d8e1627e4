use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown model `{name}`; available models: {available}")]
    UnknownModel { name: String, available: String },

    #[error("accelerators {0} and {1} are unreachable (zero bandwidth)")]
    Unreachable(usize, usize),

    #[error("zero bandwidth between communicating parties")]
    ZeroBandwidth,

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("baseline unsupported: {0}")]
    UnsupportedBaseline(String),

    #[error("instance too large for exhaustive search: {0}")]
    OracleLimits(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}
