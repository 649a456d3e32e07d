use thiserror::Error;

use noma_isac::SolveStatus;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unreadable or invalid scenario file, bad flag values.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    /// An operation that needs a converged report got something else.
    #[error("{0}")]
    Refused(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) | HarnessError::Refused(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Process exit code for a finished solve.
pub fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::Infeasible => 3,
        SolveStatus::BackendFailure => 4,
        SolveStatus::MaxIters => 5,
    }
}
