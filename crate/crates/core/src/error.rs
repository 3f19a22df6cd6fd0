use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Kernel evaluated exactly at its singularity (x = 0 or a periodic image of it).
    #[error("kernel evaluated at a singular point")]
    SingularPoint,

    #[error("invalid input: {0}")]
    Validation(String),

    /// A self-consistency or refinement check failed to reach the requested accuracy.
    #[error("accuracy failure: {0}")]
    Accuracy(String),

    /// A stochastic procedure produced a degenerate sample (e.g. an empty point set).
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
    pub fn accuracy(msg: impl Into<String>) -> Self {
        Error::Accuracy(msg.into())
    }
}
