use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("peak detection found {found} maxima but {requested} peaks were requested")]
    TooFewPeaks { found: usize, requested: usize },

    #[error("missing group parameters for mass number {0}")]
    MissingGroup(u32),

    #[error("unknown isotope with mass number {0}")]
    UnknownIsotope(u32),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_positive(value: f64, what: &'static str) -> Result<f64> {
    ensure_finite(value, what)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositive { what, value })
    }
}
