use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid SSP problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("value iteration did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("rollout safety cap of {cap} environment steps exceeded")]
    StepCapExceeded { cap: u64 },

    #[error("state {0} is not in the controllable set")]
    GoalNotControlled(usize),

    #[error("invalid cost function: {0}")]
    InvalidCost(String),
}

pub type Result<T> = std::result::Result<T, Error>;
