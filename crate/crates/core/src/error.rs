use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = TepError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TepError {
    #[error("invalid input: {0}")]
    Validation(ValidationReport),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("scenario {scenario}: {message}")]
    SingularSystem { scenario: usize, message: String },

    #[error("problem too large: {rows} rows exceeds the budget of {budget}")]
    RowBudget { rows: usize, budget: usize },

    #[error("enumeration refused: {candidates} candidates exceeds the limit of {limit}")]
    OracleTooLarge { candidates: usize, limit: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no robust plan: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TepError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TepError::Infeasible(_) => 1,
            TepError::Validation(_)
            | TepError::Parse { .. }
            | TepError::RowBudget { .. }
            | TepError::OracleTooLarge { .. }
            | TepError::Io(_) => 2,
            TepError::SingularSystem { .. } | TepError::Solver(_) => 3,
        }
    }
}
