use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unstable queue: block rate mu = {mu} must exceed arrival rate lambda = {lambda}")]
    UnstableQueue { lambda: f64, mu: f64 },

    #[error("block rate mu = {mu} outside configured range [{min}, {max}]")]
    RateOutOfRange { mu: u32, min: u32, max: u32 },

    #[error("infeasible action on device {device}: {constraint}")]
    Infeasible { device: usize, constraint: String },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no feasible action in mask")]
    EmptyMask,

    #[error("replay memory holds {have} transitions, batch needs {need}")]
    InsufficientMemory { have: usize, need: usize },

    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "episode {episode} exceeded the {cap}-step safety cap before reaching the data budget"
    )]
    StepCap { episode: usize, cap: usize },

    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

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
