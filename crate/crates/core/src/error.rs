use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value or combination of values is not admissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller broke the input contract of an operation (shape or length mismatch).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
