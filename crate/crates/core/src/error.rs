use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    /// The loss was NaN/inf. `point` is the quadrature point index where the
    /// integrand first went non-finite, when it can be attributed to one.
    #[error("non-finite objective{}", match (.point, .coords) {
        (Some(p), Some(c)) => format!(" at quadrature point {p} ({:?})", c),
        (Some(p), None) => format!(" at quadrature point {p}"),
        _ => String::new(),
    })]
    NonFinite { point: Option<usize>, coords: Option<Vec<f64>> },

    /// Training stopped because the loss went non-finite.
    #[error("training aborted at epoch {epoch}: {source}")]
    TrainingAborted {
        epoch: usize,
        last_finite: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("probe failed: {0}")]
    Probe(String),

    #[error("no null direction: Gram matrix is full rank at the working threshold")]
    NoNullDirection,

    #[error("unsupported schema version {found} in {path} (expected {expected})")]
    Schema { path: PathBuf, found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for NaN/inf losses, including training runs aborted by one.
    pub fn is_non_finite(&self) -> bool {
        match self {
            Error::NonFinite { .. } => true,
            Error::TrainingAborted { source, .. } => source.is_non_finite(),
            _ => false,
        }
    }
}
