use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid (bad spec, bad hyperparameter, incompatible options).
    #[error("configuration error: {0}")]
    Config(String),

    /// Two things that must agree in size do not.
    #[error("shape error: {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A NaN or infinity was produced or consumed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An API was called in the wrong state (e.g. sampling an underfull buffer).
    #[error("usage error: {0}")]
    Usage(String),

    /// A file could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Returns a shape error unless `expected == actual`.
pub(crate) fn ensure_len(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::shape(context, expected, actual))
    }
}
