use std::fmt;
use std::path::Path;

use noteem_core::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const SEMANTIC: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: exit::INPUT,
            message: message.into(),
        }
    }

    pub fn semantic(message: impl Into<String>) -> Self {
        CliError {
            code: exit::SEMANTIC,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: exit::IO,
            message: message.into(),
        }
    }

    /// Classifies a library error that occurred while processing `what`.
    pub fn from_core(what: impl fmt::Display, e: Error) -> Self {
        let code = match &e {
            Error::Midi { .. }
            | Error::UnsupportedMidi(_)
            | Error::Format { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidNote(_) => exit::INPUT,
            Error::Io(_) => exit::IO,
            _ => exit::SEMANTIC,
        };
        CliError {
            code,
            message: format!("{what}: {e}"),
        }
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("cannot read {}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: std::io::Error) -> Self {
        Self::io(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
