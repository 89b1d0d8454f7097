use thiserror::Error;

use crate::state::ComponentLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("component {0} already present in the chain")]
    DuplicateLabel(ComponentLabel),
    #[error("unknown component {0}")]
    UnknownComponent(ComponentLabel),
    #[error("state has not collapsed: {0} components carry mass")]
    NotCollapsed(usize),
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("invalid flow edge: {0}")]
    InvalidEdge(String),
    #[error("oracle needs an acyclic flow graph")]
    OracleUnsupported,
    #[error("hit on {0}, which carries no ready marks")]
    IllegalHit(ComponentLabel),
    #[error("epoch graph depth must be at least 1, got {0}")]
    InvalidDepth(u32),
    #[error("{0} is not on the frontier")]
    NotExtensible(ComponentLabel),
    #[error("event log contains no hits")]
    EmptyLog,
    #[error("threshold gap must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("configuration has no weak branch")]
    NoWeakBranch,
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("malformed event log at line {line}: {message}")]
    LogFormat { line: usize, message: String },
    #[error("invariant breach: {0}")]
    InvariantBreach(String),
}
