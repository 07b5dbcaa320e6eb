use std::path::PathBuf;

use equiprobe_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed table: {0}")]
    Table(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), message: message.into() }
    }

    /// Process exit status: 2 for configuration and input problems, 3 when a
    /// numerical procedure did not converge, 4 for numerical domain errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } | CliError::Write { .. } | CliError::Table(_) => 2,
            CliError::Fit(_) => 4,
            CliError::Core(e) => match e {
                CoreError::Truncation(_)
                | CoreError::RootNotConverged { .. }
                | CoreError::Eigen { .. }
                | CoreError::Quadrature { .. }
                | CoreError::Bracket { .. } => 3,
                _ => 4,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
