use thiserror::Error;

pub type Result<T, E = OkraError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OkraError {
    /// One message per violated constraint.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OkraError {
    /// True for errors caused by bad user input (as opposed to numerical
    /// failures inside a solver).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            OkraError::Validation(_)
                | OkraError::Parse { .. }
                | OkraError::Row { .. }
                | OkraError::Domain(_)
                | OkraError::Range(_)
                | OkraError::Precondition(_)
                | OkraError::Invalid(_)
                | OkraError::Io(_)
        )
    }
}
