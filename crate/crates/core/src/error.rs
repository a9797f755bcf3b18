use std::path::PathBuf;

use thiserror::Error;

use crate::game::AgentId;
use crate::gateway::GatewayError;

/// Errors raised by the game engine, agents, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("agent {agent} failed in period {period}: {reason}")]
    AgentFailure {
        agent: AgentId,
        period: u32,
        reason: String,
    },

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error(transparent)]
    Read(#[from] ReadError),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown treatment `{0}`")]
    UnknownTreatment(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failure while decoding a session log file.
#[derive(Debug, Error, PartialEq)]
pub enum ReadError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("log is empty")]
    Empty,

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
