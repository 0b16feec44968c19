use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dangling reference: {context} refers to unknown variable `{id}`")]
    DanglingReference { context: String, id: String },

    #[error("duplicate variable id `{0}`")]
    DuplicateId(String),

    #[error("wrong table length for {table}: expected {expected}, found {found}")]
    TableLength {
        table: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("variable {0} is not in the potential domain")]
    NotInDomain(String),

    #[error("inconsistent potential: nonzero value divided by zero")]
    InconsistentPotential,

    #[error("decision {0} is in probability scope")]
    DecisionInProbabilityScope(String),

    #[error("branch probability mismatch at S-DAG node {node}")]
    BranchProbabilityMismatch { node: usize },

    #[error("strategy does not match the S-DAG: {0}")]
    StrategyMismatch(String),

    #[error("model too large for exhaustive evaluation: {0}")]
    ScaleGuard(String),

    #[error("invalid requisite query: {0}")]
    InvalidQuery(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
