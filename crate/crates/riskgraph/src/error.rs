//! Failure classes of the driver and their process exit codes.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Failure {
    /// Bad flags, config file or configuration values. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input files missing or malformed. Exit code 2.
    #[error("{0}")]
    Data(#[from] DataError),
    /// Anything that goes wrong after inputs were accepted. Exit code 1.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Data(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    /// Sorts a core error: graph and config problems are the caller's
    /// inputs, everything else is a runtime failure.
    pub fn from_core(err: riskgraph_core::Error, context: &str) -> Self {
        use riskgraph_core::Error as E;
        match err {
            E::Config(msg) => Failure::Config(format!("{context}: {msg}")),
            E::InvalidGraph(_) | E::EmptyHyperedgeType(_) => Failure::Data(DataError::new(
                PathBuf::from(context),
                None,
                err.to_string(),
            )),
            other => Failure::Runtime(anyhow::anyhow!("{context}: {other}")),
        }
    }
}

/// A problem with an input file, located by path and 1-based line.
#[derive(Debug, Error, PartialEq)]
#[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct DataError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl DataError {
    pub fn new(path: PathBuf, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            path,
            line,
            message: message.into(),
        }
    }

    pub fn at(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::new(path.to_path_buf(), Some(line), message)
    }

    pub fn file(path: &Path, message: impl Into<String>) -> Self {
        Self::new(path.to_path_buf(), None, message)
    }
}

pub type CliResult<T> = Result<T, Failure>;
