use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolution mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    ResolutionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite score for view `{0}`")]
    NonFiniteScore(String),

    #[error("candidate pool exhausted after {completed} of {requested} rounds")]
    PoolExhausted { completed: usize, requested: usize },

    #[error("unknown view id `{0}`")]
    UnknownView(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
