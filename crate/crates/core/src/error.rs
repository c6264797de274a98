use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown value `{value}` for variable `{variable}`")]
    UnknownValue { variable: String, value: String },

    #[error("duplicate table for {child} given {given}")]
    DuplicateTable { child: String, given: String },

    #[error("invalid table for {child} given {given}: {reason}")]
    InvalidTable {
        child: String,
        given: String,
        reason: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("cycle detected through {0:?}")]
    Cycle(Vec<String>),

    #[error("order is not consistent with the graph: {0}")]
    InconsistentOrder(String),

    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("conditional probability undefined: evidence has probability zero")]
    UndefinedConditional,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
