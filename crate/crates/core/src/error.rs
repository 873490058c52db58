use std::path::PathBuf;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("node {0} is not present in the graph")]
    UnknownNode(NodeId),

    #[error("node id {0} was already used and cannot be reinserted")]
    ReusedId(NodeId),

    #[error("infeasible partition at {level}: {msg}")]
    Infeasible { level: String, msg: String },

    #[error("every level-{level} candidate shard is at capacity ({cap})")]
    Capacity { level: u8, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("node {0} was already presented to this model")]
    DoublePresentation(NodeId),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Infeasible { .. } | Error::Capacity { .. } => 2,
            Error::Invariant(_) => 4,
            _ => 3,
        }
    }
}
