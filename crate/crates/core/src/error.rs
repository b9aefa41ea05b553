use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The pulse sequence failed validation; every problem found is listed.
    #[error("invalid sequence: {}", .0.join("; "))]
    InvalidSequence(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A fit or search could not pin down its parameters from the data.
    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The density matrix of an ion left the physical set.
    #[error("density matrix invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by malformed inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidSequence(_) | Error::InvalidInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
