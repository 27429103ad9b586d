use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate box {interval:?}: zero weighted mass")]
    DegenerateBox { interval: (f64, f64) },
    #[error("weight is not positive on cell {cell}")]
    Nondegeneracy { cell: usize },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
