use thiserror::Error;

use crate::dag::NodeId;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum RcaError {
    #[error("graph contains a cycle")]
    CycleDetected,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("column mismatch: expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("posterior precision of node {node} is not positive definite")]
    SingularPrecision { node: NodeId },
    #[error("training column for node {node} has zero variance")]
    DegenerateMarginal { node: NodeId },
    #[error("noise assignment does not match the ancestor subgraph: {0}")]
    KeyMismatch(String),
    #[error("reference pool is empty")]
    EmptyReferencePool,
    #[error("{players} players exceed the exact Shapley cap of {cap}; enable early stopping")]
    TooManyPlayers { players: usize, cap: usize },
    #[error("sampled design matrix is rank deficient after {attempts} attempts")]
    DegenerateSystem { attempts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Attribution,
}

impl RcaError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RcaError::SingularPrecision { .. } | RcaError::DegenerateMarginal { .. } => {
                ErrorClass::Numerical
            }
            RcaError::KeyMismatch(_)
            | RcaError::EmptyReferencePool
            | RcaError::TooManyPlayers { .. }
            | RcaError::DegenerateSystem { .. } => ErrorClass::Attribution,
            _ => ErrorClass::Input,
        }
    }
}

pub type Result<T, E = RcaError> = std::result::Result<T, E>;
