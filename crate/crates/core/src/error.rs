use thiserror::Error;

/// Errors raised by the receiver, code construction and simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("exhaustive search over 2^{0} vectors is not supported (limit 2^16)")]
    TooLarge(usize),
    #[error("infeasible degree profile: {0}")]
    InfeasibleProfile(String),
    #[error("alist parse error at line {line}: {msg}")]
    Alist { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
