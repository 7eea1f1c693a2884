use std::fmt;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const ACCEPTANCE: i32 = 4;
}

/// Position inside a config file, for line-anchored messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{at}: {msg}")]
    ConfigAt { at: Location, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Acceptance(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] setpinn::Error),
}

impl BenchError {
    pub fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }

    pub fn at(file: &str, line: usize, msg: impl Into<String>) -> Self {
        BenchError::ConfigAt {
            at: Location {
                file: file.to_string(),
                line,
            },
            msg: msg.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        BenchError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::ConfigAt { .. } | BenchError::Config(_) => exit::CONFIG,
            BenchError::Acceptance(_) => exit::ACCEPTANCE,
            BenchError::Io { .. } => exit::IO,
            BenchError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            BenchError::Core(setpinn::Error::Io(_)) => exit::IO,
            BenchError::Core(_) => exit::CONFIG,
        }
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Core(e.into())
    }
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Core(e.into())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
