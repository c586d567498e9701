use thiserror::Error;

use crate::rules::PremiseReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid token {0:?}: must be nonempty and free of whitespace")]
    InvalidToken(String),

    #[error("index {index} out of range for stream of horizon {horizon}")]
    Range { index: usize, horizon: usize },

    #[error("channel set is not contained in the tuple domain: missing {missing:?}")]
    Domain { missing: Vec<String> },

    #[error("cannot split an empty sequence")]
    EmptySequence,

    #[error("cannot merge tuples: {0}")]
    Merge(String),

    #[error("bounds violation: {0}")]
    Bounds(String),

    #[error("interface mismatch: {0}")]
    Interface(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("unknown component {0:?}")]
    UnknownComponent(String),

    #[error("system is inconsistent:\n{0}")]
    Inconsistent(Box<PremiseReport>),

    #[error("codec domain error: {0}")]
    Codec(String),

    #[error("{0}")]
    Library(String),
}
