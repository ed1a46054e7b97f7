use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("cached table {path} does not match this run ({reason}); rerun with --regen")]
    CacheMismatch { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] plumetrace::Error),
}

impl CliError {
    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 usage, 3 data or format, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use plumetrace::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } | CliError::CacheMismatch { .. } => 3,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => 2,
                E::SingularCovariance { .. }
                | E::ConstantSeries
                | E::ConstantProfile
                | E::ZeroDirection => 4,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
