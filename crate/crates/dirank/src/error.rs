//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (edge list, delta file, state file, zap file).
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A node id outside `[0, n)` was passed to a graph accessor.
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    /// A graph delta that cannot be applied to the graph it targets.
    #[error("invalid delta: {0}")]
    Delta(String),

    /// Invalid solver configuration or invalid parameters to an operation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A state update that is inconsistent with the pair of graphs given.
    #[error("invalid update: {0}")]
    Update(String),

    /// An operation refused because its input is outside the supported range.
    #[error("{0}")]
    Unsupported(String),

    /// A computation that must converge ran out of budget.
    #[error("{0}")]
    Unconverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Internal invariant violation; indicates corrupted solver state.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
