use thiserror::Error;

use crate::scenario::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown bus {0:?}")]
    UnknownBus(String),
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("inconsistent tree: {0}")]
    InconsistentTree(String),
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cut owner {0} is not a child of this stage")]
    NotAChild(NodeId),
    #[error("solver backend error: {0}")]
    Backend(String),
    #[error("solver returned {status} for {context}")]
    SolveStatus { status: String, context: String },
    #[error("cut generation failed: {0}")]
    CutGeneration(String),
    #[error("instance too large for the extensive form: {0}")]
    SizeGuard(String),
    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
