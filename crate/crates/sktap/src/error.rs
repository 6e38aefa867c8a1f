//! Error types shared across the solver library.

use thiserror::Error;

/// Library-wide error type.
///
/// `InvalidInput` marks violations of an operation's preconditions (bad
/// dimensions, out-of-range parameters). `Domain` marks mathematically
/// undefined requests on otherwise valid inputs (log of a non-PD matrix,
/// Stieltjes transform inside the support). `Numerical` marks iteration
/// failures (non-convergence, optimizer stalls) and carries the best value
/// found where that is meaningful.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
