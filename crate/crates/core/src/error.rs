use thiserror::Error;

/// Errors raised by the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("empty offer set in scenario {scenario}")]
    EmptyOfferSet { scenario: usize },
    #[error("decision is infeasible: {0}")]
    InfeasibleDecision(String),
    #[error("enumeration cap exceeded: {free} free binaries (cap {cap})")]
    EnumerationCap { free: usize, cap: usize },
    #[error("extensive form too large: {size} choice variables (cap {cap})")]
    SizeCap { size: usize, cap: usize },
    #[error("subproblem underfilled in scenario {scenario}: sum of weights {total}")]
    Underfilled { scenario: usize, total: f64 },
    #[error("decision space is infeasible")]
    InfeasibleSpace,
    #[error("numerical breakdown in the LP solver: {0}")]
    Numerical(String),
    #[error("unknown application tag {0}")]
    UnknownApp(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
