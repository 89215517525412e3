// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the detection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} is outside the supported range: {reason}")]
    OutOfRange { index: usize, reason: String },

    #[error("observation {index} has zero density under `{density}`")]
    ZeroDensity { index: usize, density: &'static str },

    #[error("observation {index} violates the model support: {reason}")]
    SupportViolation { index: usize, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("censoring too high: {censored} of {n_trials} trials reached the horizon {horizon}")]
    ExcessiveCensoring {
        censored: usize,
        n_trials: usize,
        horizon: usize,
    },

    #[error("insufficient effective trials for `{metric}`: {effective} < {required}")]
    InsufficientTrials {
        metric: String,
        effective: usize,
        required: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
