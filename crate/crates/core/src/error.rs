use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid observable {label}: {reason}")]
    InvalidObservable { label: String, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual} ({what})")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("site index {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("Monte Carlo state became non-finite (energy {0})")]
    PoisonedState(f64),

    #[error("no witness: {0}")]
    NoWitness(String),

    #[error("{n_sites} sites exceed the exact-diagonalization limit of {max}")]
    DimensionOverflow { n_sites: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
