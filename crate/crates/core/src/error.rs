use thiserror::Error;

use crate::trace::SelectionTrace;

/// Errors produced by selectors, learners, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The pool ran dry (or the pass budget was spent) before a round filled its batch.
    #[error("pool exhausted in round {round} after {passes} passes ({selected}/{wanted} selected)")]
    PoolExhausted {
        round: usize,
        passes: usize,
        selected: usize,
        wanted: usize,
        partial: Box<SelectionTrace>,
    },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("aggregate failure: {0}")]
    AggregateFailure(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
