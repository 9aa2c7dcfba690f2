use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition on the input (sample count, sortedness, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Least-squares fit did not converge; carries the last parameter vector.
    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure {
        reason: String,
        iterations: usize,
        last_parameters: Vec<f64>,
    },

    /// Inconsistent simulation or analysis set-up (channel layout, run extent, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed tag or sample file.
    #[error("format error: {0}")]
    Format(String),

    #[error("wrong source variant: {0}")]
    WrongVariant(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
