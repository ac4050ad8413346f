use std::fmt;

use quadric_core::Error as CoreError;
use serde::Serialize;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Tolerance,
    Domain,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Tolerance => 3,
            ErrorKind::Domain => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Tolerance,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: ErrorKind,
            exit_code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Record {
            error: self.kind,
            exit_code: self.exit_code(),
            message: &self.message,
        })
        .expect("record serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::Domain(_) => ErrorKind::Domain,
            CoreError::ToleranceNotMet { .. } | CoreError::EigenNoConvergence { .. } => ErrorKind::Tolerance,
            CoreError::DimensionMismatch { .. }
            | CoreError::NotHermitian { .. }
            | CoreError::InvalidMultiIndex { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::GridTooSmall(_) => ErrorKind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
