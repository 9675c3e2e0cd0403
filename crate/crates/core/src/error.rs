use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("no interactions")]
    NoInteractions,

    #[error("items missing metadata: {0}")]
    MissingMetadata(String),

    #[error("attribute must partition items into ≥2 groups")]
    SingleGroup,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exposure domains differ: {left:?} vs {right:?}")]
    DomainMismatch { left: Vec<String>, right: Vec<String> },

    #[error("unknown attribute value {0:?}")]
    UnknownAttribute(String),

    #[error("empty ranked list")]
    EmptyList,

    #[error("non-finite factors after epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },

    #[error("oracle bound exceeded: pool {pool} (max 8), k {k} (max 4)")]
    OracleBound { pool: usize, k: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

/// Prefix errors from a pipeline stage with the stage name.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
