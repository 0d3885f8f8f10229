use std::path::PathBuf;

/// Errors raised by the design, identification and simulation stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A frequency, order or similar argument lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A transfer function denominator vanishes on the evaluation grid.
    #[error("denominator is singular at {frequency_hz} Hz")]
    Singularity { frequency_hz: f64 },

    /// Inconsistent parameters: shift budget, period mismatch, bad sizes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Least-squares normal equations are rank deficient.
    #[error("singular least-squares problem ({0}); try a lower model order")]
    SingularFit(String),

    #[error("identification aborted: {0}")]
    Identification(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stability check failed: {0}")]
    Unstable(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
