use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    /// The observed state has zero likelihood under every prior atom.
    #[error("observation impossible under every prior atom")]
    ImpossibleObservation,

    #[error("strategy has no action for reachable state n1={n1} x1={x1} n2={n2} x2={x2}")]
    MissingStrategy { n1: u32, x1: u32, n2: u32, x2: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
