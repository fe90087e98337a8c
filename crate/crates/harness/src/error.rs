use std::path::{Path, PathBuf};

use thiserror::Error;

/// Harness failure. `Display` is always a single line so the CLI can print it
/// as a machine-parseable error record.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: line {line}: {key}: {message}")]
    Config { line: usize, key: String, message: String },
    #[error("io: {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("format: {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training: {0}")]
    Training(String),
    #[error("core: {0}")]
    Core(#[from] thermsr_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, err: impl std::fmt::Display) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), message: one_line(err) }
    }

    pub fn format(path: impl AsRef<Path>, message: impl std::fmt::Display) -> Self {
        Error::Format { path: path.as_ref().to_path_buf(), message: one_line(message) }
    }

    /// Stable category token, the first field of the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Checkpoint(_) => "checkpoint",
            Error::Training(_) => "training",
            Error::Core(_) => "core",
        }
    }
}

fn one_line(m: impl std::fmt::Display) -> String {
    m.to_string().replace(['\n', '\r'], " ")
}
