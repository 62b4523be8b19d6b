//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A raw parameter value lies outside its declared bounds.
    #[error("parameter `{name}`: value {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    /// A unit-cube coordinate lies outside [0, 1].
    #[error("unit-cube coordinate {value} at dim {index} outside [0, 1]")]
    OutOfUnitCube { index: usize, value: f64 },

    /// A search space failed validation.
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    /// An observation arrived with the wrong trial index.
    #[error("trial index {got} does not follow history of length {expected}")]
    TrialIndex { got: usize, expected: usize },

    /// A value that must be finite was not.
    #[error("non-finite value: {0}")]
    NonFinite(f64),

    /// A configuration field violates a module constraint.
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },

    /// Linear algebra gave up (Cholesky failed after the jitter ladder).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A contract between modules was violated by the caller.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures that the optimizer may absorb by falling back to a
    /// random suggestion for the trial.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
