use thiserror::Error;

/// Errors raised by the fairness library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined marginal {name} (conditioning event has zero mass)")]
    UndefinedMarginal { name: String },

    #[error("group {group} is undefined for {notion}: conditioning event has zero mass")]
    UndefinedGroup { group: usize, notion: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite score {0}")]
    NonFiniteScore(f64),

    #[error("support of size {size} exceeds enumeration limit {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("degenerate training problem: {0}")]
    Degenerate(String),

    #[error("ambiguous oracle outcome: {0}")]
    Ambiguous(String),

    #[error("no feasible lambda: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, FairError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FairError::Domain(msg.into()))
}
