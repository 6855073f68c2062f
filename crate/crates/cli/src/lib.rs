//! Command-line surface over `tsproc-core`: artifact files, validation,
//! classification, simulation, game scoring and the reproducible demos.

pub mod artifact;
pub mod commands;
pub mod demos;
pub mod report;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed JSON at byte {offset}: {message}")]
    Parse { path: String, offset: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Core(#[from] tsproc_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Every error is a usage or I/O problem; constraint failures are
    /// reported, not raised.
    pub fn exit_code(&self) -> i32 {
        2
    }

    /// Attaches the file path to a parse or schema error.
    pub fn at(self, path: &Path) -> Self {
        let p = path.display().to_string();
        match self {
            CliError::Parse { offset, message, .. } => CliError::Parse { path: p, offset, message },
            CliError::Schema { message, .. } => CliError::Schema { path: p, message },
            CliError::Core(e) => CliError::Schema { path: p, message: e.to_string() },
            other => other,
        }
    }
}
