use thiserror::Error;

/// Errors produced by the numerical library.
///
/// The variants map onto the CLI exit-code scheme: input problems exit 2,
/// domain and numeric failures exit 3, I/O failures exit 4.
#[derive(Debug, Error)]
pub enum SrrError {
    /// Malformed or non-finite input data.
    #[error("invalid input: {0}")]
    Input(String),
    /// An argument outside the operation's domain (rank out of range, shape mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative kernel failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SrrError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        SrrError::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SrrError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SrrError>;
