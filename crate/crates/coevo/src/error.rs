//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration (bad values, unknown keys, unusable flags).
    #[error("configuration error: {0}")]
    Config(String),

    /// The benchmark spec cannot produce a valid world.
    #[error("benchmark construction failed: {0}")]
    Benchmark(String),

    /// A serialized artifact failed to parse or violated an invariant.
    /// `line` is 1-based; `origin` names the file (or `<memory>`).
    #[error("{origin}:{line}: malformed record: {msg}")]
    Malformed {
        origin: String,
        line: usize,
        msg: String,
    },

    /// Filesystem failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A training-loop phase failed; wraps the underlying error.
    #[error("iteration {iteration}, phase `{phase}`: {source}")]
    Phase {
        phase: &'static str,
        iteration: u32,
        #[source]
        source: Box<Error>,
    },

    /// An operation that needs training data received none.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// An operation that needs pool members received none.
    #[error("empty pool: {0}")]
    EmptyPool(String),

    /// Out-of-range index, mismatched shapes, or other invalid input.
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(origin: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            origin: origin.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn phase(phase: &'static str, iteration: u32, source: Error) -> Self {
        Error::Phase {
            phase,
            iteration,
            source: Box::new(source),
        }
    }

    /// True for errors caused by user input (config files, flags, corrupt
    /// artifacts handed to us) as opposed to runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Benchmark(_) | Error::Malformed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
