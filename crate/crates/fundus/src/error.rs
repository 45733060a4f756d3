use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] fundus_core::Error),
    #[error("{}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt file: {0}")]
    FormatCorrupt(String),
    #[error("invalid dataset: {0}")]
    DatasetInvalid(String),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

impl Error {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::IoFailure { path: path.to_path_buf(), source }
    }

    /// Prefixes a format error with the file it came from.
    pub(crate) fn in_file(self, path: &Path) -> Error {
        match self {
            Error::FormatCorrupt(msg) => Error::FormatCorrupt(format!("{}: {msg}", path.display())),
            other => other,
        }
    }

    /// Process exit status: 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) | Error::Core(fundus_core::Error::ConfigInvalid(_)) => 2,
            _ => 1,
        }
    }
}
