use std::path::{Path, PathBuf};

/// Failures of the command line tool. Each maps onto a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error(transparent)]
    Core(#[from] asfnet_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    /// Model files disagree with their sidecar.
    #[error("model mismatch: {0}")]
    Mismatch(String),
}

pub type ToolResult<T> = Result<T, ToolError>;

impl ToolError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        ToolError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        ToolError::Usage(message.into())
    }

    /// 0 success, 2 invalid argument or input, 3 IO, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use asfnet_core::Error as E;
        match self {
            ToolError::Core(E::NumericalFailure { .. } | E::TrainingDiverged { .. } | E::UndefinedMetric(_)) => 4,
            ToolError::Core(_) => 2,
            ToolError::Io { .. } => 3,
            ToolError::Parse { .. } | ToolError::Usage(_) | ToolError::Mismatch(_) => 2,
        }
    }
}
