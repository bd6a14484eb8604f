use thiserror::Error;

/// Runner failures, split by exit code: configuration problems exit with 1,
/// numerical aborts with 2.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 1,
            RunnerError::Numerical(_) => 2,
            RunnerError::Io(_) => 2,
        }
    }
}

impl From<hartree_dm_core::CoreError> for RunnerError {
    fn from(e: hartree_dm_core::CoreError) -> Self {
        RunnerError::Numerical(e.to_string())
    }
}

pub type RunnerResult<T> = Result<T, RunnerError>;
