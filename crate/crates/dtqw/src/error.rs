use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed argument: wrong shape, non-unitary input, bad axis, ...
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Unknown protocol identifier.
    #[error("unknown protocol `{id}`; valid ids: {valid}")]
    UnknownProtocol { id: String, valid: String },

    /// Operation not available for the given protocol.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The band gap closes where a gapped quantity was requested.
    #[error("gapless point at k = {k:?} (|d| = {residual:e})")]
    Gapless { k: Vec<f64>, residual: f64 },

    /// No usable sample on the requested grid.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Symmetry findings that contradict each other.
    #[error("inconsistent symmetry findings: {0}")]
    Inconsistent(String),

    /// Numerical procedure failed to reach the required accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Configuration file or flag could not be used.
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
