// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::process::ExitCode;

use bqcd_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration; `key` names the offending entry.
    Config { key: String, reason: String },
    /// The library refused to report an estimate (censoring, too few trials).
    Refused(String),
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config { .. } => ExitCode::from(2),
            CliError::Refused(_) => ExitCode::from(3),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { key, reason } => write!(f, "config error at `{key}`: {reason}"),
            CliError::Refused(msg) => write!(f, "refused: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::ExcessiveCensoring { .. } | CoreError::InsufficientTrials { .. } => CliError::Refused(err.to_string()),
            CoreError::InvalidParameter { name, reason } => CliError::config(name, reason),
            CoreError::Config(reason) => CliError::config("horizon", reason),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}
