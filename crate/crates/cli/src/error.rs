use std::fmt;

use formatsel_core::Error as CoreError;

/// Process exit codes. Stable across releases.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION_FAILED: i32 = 1;
    pub const INPUT_ERROR: i32 = 2;
    pub const UNKNOWN_ENTITY: i32 = 3;
    pub const VERSION_MISMATCH: i32 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT_ERROR,
            message: message.into(),
        }
    }

    pub fn unknown(message: impl Into<String>) -> Self {
        Self {
            code: exit::UNKNOWN_ENTITY,
            message: message.into(),
        }
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
        let code = match &e {
            CoreError::UnknownFormat(_) => exit::UNKNOWN_ENTITY,
            CoreError::SchemaVersionMismatch { .. } => exit::VERSION_MISMATCH,
            _ => exit::INPUT_ERROR,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl CliError {
    /// A closed output pipe ends the run quietly.
    pub fn is_silent(&self) -> bool {
        self.code == exit::SUCCESS
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Self {
                code: exit::SUCCESS,
                message: String::new(),
            };
        }
        Self::input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => io.into(),
            other => Self::input(format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        match e.io_error_kind() {
            Some(kind) => std::io::Error::from(kind).into(),
            None => Self::input(e.to_string()),
        }
    }
}
