use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The Haugazeau outer approximation became empty, which cannot happen
    /// when the Kuhn-Tucker set is nonempty.
    #[error("algorithm inconsistency: {0}")]
    Inconsistent(String),

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// A well-formed input file whose contents fail validation.
    #[error("invalid input at {context}: {message}")]
    Validation { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
