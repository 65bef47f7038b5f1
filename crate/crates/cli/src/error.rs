use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid input {}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } | CliError::Write { .. } => "io",
            CliError::Input { .. } => "input",
            CliError::Domain(_) => "domain",
        }
    }

    pub fn path(&self) -> Option<&PathBuf> {
        match self {
            CliError::Io { path, .. } | CliError::Write { path, .. } | CliError::Input { path, .. } => Some(path),
            CliError::Domain(_) => None,
        }
    }

    pub fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}
