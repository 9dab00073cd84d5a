use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification budget exceeded: {required} membership checks needed, cap is {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("construction failure: {0}")]
    ConstructionFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 assumption violated,
    /// 4 estimation failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::BudgetExceeded { .. }
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. } => 2,
            Error::AssumptionViolated(_) => 3,
            Error::EstimationFailure(_)
            | Error::ConstructionFailure(_)
            | Error::InsufficientData(_) => 4,
            Error::Io(_) => 1,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
