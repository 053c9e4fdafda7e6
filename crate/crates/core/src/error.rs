use std::path::PathBuf;

use thiserror::Error;

use crate::client::ClientError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "triple #{index} ({head}, {relation}, {tail}) is out of bounds for a graph with {entity_count} entities and {relation_count} relations"
    )]
    TripleOutOfBounds {
        index: usize,
        head: u32,
        relation: u32,
        tail: u32,
        entity_count: usize,
        relation_count: usize,
    },

    #[error("node id {id} out of range (graph has {count} entities)")]
    NodeOutOfRange { id: u32, count: usize },

    #[error("relation id {id} out of range (graph has {count} relations)")]
    RelationOutOfRange { id: u32, count: usize },

    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("dataset directory {dir} is missing required file(s): {}", missing.join(", "))]
    MissingFiles { dir: PathBuf, missing: Vec<String> },

    #[error("missing upstream artifact {path}; run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("cannot train on an empty graph")]
    EmptyGraph,

    #[error("{0}")]
    Mismatch(String),

    #[error("parse failure rate {rate:.4} exceeds the ceiling {ceiling}")]
    ParseFailureCeiling { rate: f64, ceiling: f64 },

    #[error(transparent)]
    Client(#[from] ClientError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Whether the error comes from talking to a completion endpoint.
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Client(_))
    }
}
