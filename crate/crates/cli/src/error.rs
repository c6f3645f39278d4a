use std::path::PathBuf;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration fault: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] cryoporo_core::Error),

    #[error("I/O failure at {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// 2 configuration, 3 abort or I/O, 4 invariant.
    pub fn exit_code(&self) -> i32 {
        use cryoporo_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Config { .. }) => 2,
            CliError::Core(E::Invariant { .. }) => 4,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 3,
        }
    }
}
