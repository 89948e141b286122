use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("observation {observation} has zero probability under joint action {action}")]
    ZeroProbabilityObservation { action: usize, observation: usize },

    #[error("node {node:?} at layer {layer} is unreachable")]
    UnreachableNode { layer: usize, node: Vec<usize> },

    #[error("exact enumeration needs {count} entries, above the cap of {cap}")]
    CombinatorialLimitExceeded { count: u128, cap: u128 },

    #[error("enumeration count {count} exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failure while reading a problem or policy file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("semantic error at `{key}`: {message}")]
    Semantic { key: String, message: String },
}

impl ParseError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(key: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Semantic {
            key: key.into(),
            message: message.into(),
        }
    }
}
