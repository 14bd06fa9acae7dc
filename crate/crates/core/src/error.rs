use thiserror::Error;

use crate::instance::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {reason}")]
    Syntax {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("line {line}: vertex {vertex} is outside 1..={vertex_count}")]
    DanglingVertex {
        line: usize,
        vertex: usize,
        vertex_count: usize,
    },
    #[error("line {line}: negative edge cost")]
    NegativeCost { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid instance: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("terminals {0:?} are not connected in the graph")]
    NoTree(Vec<usize>),
    #[error("{got} terminals exceed the exact Steiner tree limit of {limit}")]
    TooManyTerminals { got: usize, limit: usize },
    #[error("candidate enumeration would produce {count} sets, above the cap of {cap}")]
    CandidateCap { count: u128, cap: usize },
    #[error("set {0:?} is not actively connected")]
    NotActivelyConnected(Vec<usize>),
    #[error("infeasible forest: demand {0} is not connected")]
    InfeasibleForest(usize),
    #[error("tuples {0} and {1} are neither nested nor disjoint")]
    LaminarityBroken(usize, usize),
    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
