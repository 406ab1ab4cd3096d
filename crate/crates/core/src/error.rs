use thiserror::Error;

/// Errors produced by the solver, evaluators and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource cap exceeded: {what} would need more than {cap} entries")]
    ResourceCap { what: &'static str, cap: usize },

    #[error("expansion rejected: {0}")]
    InvalidExpansion(String),

    #[error("belief {0} is not the root or a one-step successor of the plan root")]
    NotASuccessor(String),

    #[error("policy has no entry for reachable meta-state {0}")]
    MissingPolicyState(String),

    #[error("meta-graph has a same-time cycle through {0}")]
    SameTimeCycle(String),

    #[error("normalized reward undefined: V* equals V^g")]
    DegenerateNormalization,

    #[error("sensitivity needs a uniform grid of at least 3 points, got {0}")]
    GridTooSmall(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
