use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Command failures, each tied to a stable process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("{0}")]
    Format(String),

    #[error("{0}")]
    Dimension(convdistill::Error),

    #[error("{0}\nhint: the spectrum of X has (near-)zero bins; pass a positive --lambda or --lambda auto")]
    IllConditioned(convdistill::Error),

    #[error("{0}")]
    Numerical(convdistill::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Format(_) | CliError::Dimension(_) => 3,
            CliError::IllConditioned(_) | CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<convdistill::Error> for CliError {
    fn from(e: convdistill::Error) -> Self {
        use convdistill::Error as E;
        match e {
            E::DivisionNearZero { .. } => CliError::IllConditioned(e),
            E::ImaginaryResidue { .. } => CliError::Numerical(e),
            E::InvalidParameter(msg) | E::InvalidSegmentation(msg) => CliError::Usage(msg),
            E::UnknownFeature { .. } | E::UnsupportedSegmentation => CliError::Usage(e.to_string()),
            _ => CliError::Dimension(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
