use thiserror::Error;

use crate::instance::{ValidationReport, ValuationMode};

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("invalid instance: {0}")]
    Validation(ValidationReport),

    #[error("operation requires a {expected} instance, got {found}")]
    ModeMismatch {
        expected: ValuationMode,
        found: ValuationMode,
    },

    #[error("{what} is infeasible for n = {n} (limit {limit})")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("redistribution undefined: Shapley values sum to zero")]
    NormalizationUndefined,

    #[error("transaction {0} is already in the coalition")]
    AlreadyInCoalition(usize),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coalition table incomplete: {0}")]
    IncompleteTable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for infeasible sizes, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TooLarge { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
