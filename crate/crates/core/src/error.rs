use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    /// Caller supplied arguments outside an operation's contract.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite input to {what}: ({s}, {t})")]
    NonFiniteInput { what: &'static str, s: f64, t: f64 },

    #[error("length mismatch: expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Π₊ membership failure: the coefficient must be positive at every node.
    #[error("coefficient `{field}` is not positive at node {node} (value {value})")]
    NotPositive {
        field: &'static str,
        node: usize,
        value: f64,
    },

    #[error("non-finite {quantity} at node {node}")]
    NonFiniteNode { quantity: &'static str, node: usize },

    #[error("non-finite energy during line search at iteration {iteration} (trace: {trace:?})")]
    LineSearch { iteration: usize, trace: Vec<f64> },

    #[error("threshold search failed: {0}")]
    Search(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
