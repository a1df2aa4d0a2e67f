use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside the repetition period [0, {t_r})")]
    OutOfPeriod { t: f64, t_r: f64 },

    #[error("infeasible scene constraints: {0}")]
    Infeasible(String),

    #[error("log-likelihood undefined: zero reflectivity with zero background and {m} detections")]
    DegenerateLikelihood { m: usize },

    #[error("bracket not found after {iterations} expansions around tau_0 = {tau_0}")]
    BracketNotFound { tau_0: f64, iterations: usize },

    #[error("no detections: estimate undefined")]
    NoDetections,

    #[error("quadrature did not converge: estimate {value}, error {error}")]
    Quadrature { value: f64, error: f64 },

    #[error("config {origin}: {reason}")]
    Config { origin: String, reason: String },

    #[error("missing required key `{key}` in {origin}")]
    MissingKey { key: String, origin: String },

    #[error("unknown key `{key}` in {origin}")]
    UnknownKey { key: String, origin: String },

    #[error("corrupt frame stack: {0}")]
    CorruptStack(String),

    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
