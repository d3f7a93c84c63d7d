use thiserror::Error;

use crate::diagram::Violation;
use crate::rjt::RjtViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),

    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },

    #[error("diagram is invalid: {}", join(.0))]
    InvalidDiagram(Vec<Violation>),

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid topological order: {0}")]
    InvalidOrder(String),

    #[error("state tuple {tuple:?} does not fit radices {radices:?}")]
    StateOutOfRange { tuple: Vec<usize>, radices: Vec<usize> },

    #[error("flat index {index} out of range (total {total})")]
    IndexOutOfRange { index: usize, total: usize },

    #[error("{what} has size {size}, above the configured cap {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },

    #[error("rooted junction tree is invalid: {}", join(.0))]
    InvalidTree(Vec<RjtViolation>),

    #[error("target node set is empty")]
    EmptyTarget,

    #[error("no common ancestor cluster for `{0}` and `{1}`")]
    NoCommonAncestor(String, String),

    #[error("ambiguous branch below `{e}` toward `{m}`: {candidates:?}")]
    AmbiguousBranch { e: String, m: String, candidates: Vec<String> },

    #[error("transform error: {0}")]
    Transform(String),

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("probability threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("no cluster contains {{{}}}; {hint}", .scope.join(", "))]
    NoSuitableCluster { scope: Vec<String>, hint: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
