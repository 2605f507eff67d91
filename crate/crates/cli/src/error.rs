use std::path::PathBuf;

use rmtde_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for bad input, 2 for solver failure, 3 for a failed validation check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    /// Classifies a core error raised while computing `context`.
    pub fn from_core(context: impl std::fmt::Display, err: CoreError) -> Self {
        let message = format!("{context}: {err}");
        match innermost(&err) {
            CoreError::NotConverged { .. }
            | CoreError::Singular(_)
            | CoreError::NotPositiveDefinite(_)
            | CoreError::Quadrature(_)
            | CoreError::InvalidSolution(_)
            | CoreError::Optimization(_) => CliError::Numerical(message),
            _ => CliError::Config(message),
        }
    }
}

fn innermost(err: &CoreError) -> &CoreError {
    match err {
        CoreError::Trial { source, .. } => innermost(source),
        other => other,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
