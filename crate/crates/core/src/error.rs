use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, the channel generator and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("iteration budget of {0} Newton steps exhausted before reaching tolerance")]
    MaxIterations(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("{count} pairings exceed the enumeration cap of {cap}")]
    Size { count: u128, cap: u128 },

    #[error("out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
