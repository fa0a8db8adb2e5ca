//! Configuration, orchestration and artifact output for the `pairwave` binary.

use std::path::Path;

pub mod config;
pub mod output;
pub mod pipeline;

/// Failures surfaced by the command line, each with a fixed exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} failed: {message}")]
    Solver { stage: &'static str, message: String },

    #[error("missing upstream stage {stage}: {detail}")]
    Dependency { stage: &'static str, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// 2 invalid config, 3 solver or i/o failure, 4 missing upstream artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { .. } | CliError::Io(_) => 3,
            CliError::Dependency { .. } => 4,
        }
    }
}

/// Exit code of a completed run: 0 when every enabled check passes, 1 otherwise.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
