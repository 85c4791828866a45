use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition. `field` names the offending input.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The energy decreased without bound along the descent iterates.
    #[error("energy is not coercive at truncation level {k}: {message}")]
    NonCoercive { k: u32, message: String },

    #[error("truncation escalation reached k_max = {k_max} without stabilizing")]
    KMaxExhausted { k_max: u32 },

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
