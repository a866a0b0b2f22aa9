//! Scenario-driven runner for the `dualpair` library: reads a JSON
//! scenario, runs its commands, and writes a JSON report and CSV clouds.

pub mod commands;
pub mod export;
pub mod report;
pub mod scenario;

use std::path::Path;

pub use dualpair;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("csv export: {0}")]
    Csv(String),

    #[error(transparent)]
    Numeric(#[from] dualpair::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

/// The alphabetized builtin table printed by `list`.
pub fn builtin_listing() -> String {
    let width = dualpair::builtins::BUILTINS.iter().map(|b| b.name.len()).max().unwrap_or(0);
    dualpair::builtins::BUILTINS.iter().map(|b| format!("{:width$}  {}\n", b.name, b.description)).collect()
}
