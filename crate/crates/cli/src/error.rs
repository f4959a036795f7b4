use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or value error in the job document or an override.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] lambda_heom::Error),

    #[error("{0}")]
    VerdictFailed(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for a
    /// failed convergence or validation verdict, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        use lambda_heom::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Schema { .. } => 2,
            CliError::Core(E::InvalidParameter { .. } | E::UnknownMethod(..)) => 2,
            CliError::Core(E::Numerical { .. } | E::CutoffLeakage { .. } | E::GridMismatch(_)) => 3,
            CliError::VerdictFailed(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
