use thiserror::Error;

/// Failures mapped onto the process exit-code contract.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("{0} property violation(s)")]
    Violation(u64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn field(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("invalid {field}: {message}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Convergence(_) => 2,
            CliError::Violation(_) => 3,
        }
    }
}

impl From<fraplace_core::Error> for CliError {
    fn from(e: fraplace_core::Error) -> Self {
        use fraplace_core::Error as E;
        match e {
            E::NonCoercive { .. } | E::KMaxExhausted { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
