use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("guard `{guard}` exceeded: {actual} > {limit}")]
    Guard {
        guard: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("operation requires an exact channel law: {0}")]
    SamplerOnly(String),

    #[error("zero-probability pair: {0}")]
    ZeroProbability(String),

    #[error("config line {line}, column {column}: guard `{guard}` exceeded: {actual} > {limit}")]
    ConfigGuard {
        line: usize,
        column: usize,
        guard: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
