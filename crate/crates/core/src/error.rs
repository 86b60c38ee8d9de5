use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("invalid scenario `{scenario}`: {msg}")]
    InvalidScenario { scenario: String, msg: String },

    #[error("scenario not found: {}", .0.display())]
    ScenarioNotFound(PathBuf),

    #[error("no admissible route of at least {min_length} m in scenario `{scenario}`")]
    NoAdmissibleRoute { scenario: String, min_length: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
