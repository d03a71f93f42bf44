use thiserror::Error;

/// Errors raised by the graph, simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph has {n} nodes; exhaustive enumeration is limited to {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("too many maximal schedules ({count}); cover enumeration is limited to {limit}")]
    TooManySchedules { count: usize, limit: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("queue counter overflow: x0 + horizon exceeds 2^63 - 1")]
    QueueOverflow,

    #[error("fluid engine: {0}")]
    Fluid(String),

    #[error("insufficient data: need at least {needed} {what}, got {got}")]
    Insufficient { what: &'static str, needed: usize, got: usize },

    #[error("missing record: {0}")]
    MissingRecord(&'static str),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
