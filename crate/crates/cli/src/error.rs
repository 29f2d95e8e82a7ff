use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Everything that ends a command early. All variants exit with status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error on '{}': {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("parse error in {what} '{}': {message}", path.display())]
    Parse {
        what: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("bad command line: {0}")]
    Usage(String),
    #[error("replay error: {0}")]
    Replay(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
