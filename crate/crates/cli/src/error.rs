use fbnorm::FbError;
use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const ACCURACY: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Accuracy(String),

    #[error("{0}")]
    NonConvergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => exit::USAGE,
            CliError::Data(_) => exit::DATA,
            CliError::Accuracy(_) => exit::ACCURACY,
            CliError::NonConvergence(_) => exit::NON_CONVERGENCE,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<FbError> for CliError {
    fn from(e: FbError) -> Self {
        let msg = e.to_string();
        match e {
            FbError::Domain(_) | FbError::Config(_) => CliError::Usage(msg),
            FbError::Data { .. } => CliError::Data(msg),
            FbError::NonFinite { .. } | FbError::Accuracy { .. } | FbError::Conditioning(_) => {
                CliError::Accuracy(msg)
            }
            FbError::LowAcceptance { .. } => CliError::Accuracy(format!(
                "{msg}; raise --max-tries, or reduce |gamma| or the spread of theta"
            )),
            FbError::Stagnation { .. } => CliError::NonConvergence(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
