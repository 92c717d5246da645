use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("{what} exceeds capacity: {value} > {cap}")]
    Capacity {
        what: &'static str,
        value: String,
        cap: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn capacity(what: &'static str, value: impl ToString, cap: impl ToString) -> Self {
        Error::Capacity {
            what,
            value: value.to_string(),
            cap: cap.to_string(),
        }
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
