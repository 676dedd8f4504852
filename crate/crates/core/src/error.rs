use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("state space exceeded the cap of {cap} states")]
    Resource { cap: usize },

    #[error("stationary solve did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("event protocol violation: {0}")]
    Protocol(String),

    #[error("replay diverged at sequence number {seq}: {reason}")]
    ReplayMismatch { seq: u64, reason: String },

    #[error("malformed record on line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("storage error: {0}")]
    Storage(#[from] io::Error),
}
