use std::path::PathBuf;

use kaya_lmdi::ErrorKind;

/// Process exit status. Nothing outside this set is ever returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    Numeric = 2,
    Io = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] kaya_lmdi::Error),
    #[error("{0}")]
    Usage(String),
    #[error("panel validation failed with {0} error finding(s)")]
    Validation(usize),
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit(&self) -> Exit {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => Exit::Input,
                ErrorKind::Numeric => Exit::Numeric,
                ErrorKind::Io => Exit::Io,
            },
            CliError::Usage(_) | CliError::Validation(_) | CliError::Parse { .. } => Exit::Input,
            CliError::Io { .. } => Exit::Io,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
