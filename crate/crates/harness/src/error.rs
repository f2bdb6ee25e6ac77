use thiserror::Error;

/// Failures surfaced by the harness, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Core(#[from] minimax_core::Error),
    #[error("oracle problem too large: {unknowns} unknowns exceed the cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Unsupported(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type HResult<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 0 ok, 2 infeasible control set, 3 singular system, 4 parse error.
    pub fn exit_code(&self) -> i32 {
        use minimax_core::Error as E;
        match self {
            HarnessError::Parse(_) | HarnessError::Config { .. } => 4,
            HarnessError::Core(E::InfeasibleU) => 2,
            HarnessError::Core(
                E::SingularSystem(_)
                | E::SingularKkt(_)
                | E::SingularCompletion
                | E::RankDeficient(_),
            ) => 3,
            _ => 1,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(std::io::Error::other(e.to_string()))
    }
}
