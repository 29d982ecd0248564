use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("staircase length k must be at least 1")]
    ZeroSteps,
    #[error("contender bound N must be at least 2, got {0}")]
    ContenderBoundTooSmall(u64),
    #[error("hash width {bits} bits is too narrow (need at least {needed})")]
    HashTooNarrow { bits: u32, needed: u32 },
    #[error("N^(1/k) for k={k}, N={n} does not reproduce 1/N (relative error {rel_error:e})")]
    InexactRoot { k: u32, n: u64, rel_error: f64 },
    #[error("staircase for k={k}, N={n} is not strictly increasing at this precision")]
    NonMonotoneStaircase { k: u32, n: u64 },
    #[error("level {level} outside 0..={k}")]
    LevelOutOfRange { level: u32, k: u32 },
    #[error("bad parameter config: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("operation requires a {expected} chain, found {found}")]
    WrongVariant { expected: &'static str, found: &'static str },
    #[error("operation requires a {expected} block")]
    WrongKind { expected: &'static str },
    #[error("call value needs more than 256 bits")]
    CallValueTooWide,
    #[error("block rejected: {0:?}")]
    Rejected(crate::chain::VerdictReason),
    #[error("malformed block line: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("contender count {n} outside 0..={max}")]
    CountOutOfRange { n: u64, max: u64 },
    #[error("tail threshold m must be at least 1")]
    NonPositiveThreshold,
    #[error("probability p={0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("truncation must be at least 1")]
    ZeroTruncation,
    #[error("pmf mass {0} deviates from 1 beyond renormalisation tolerance")]
    MassMismatch(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NursingError {
    #[error("nursery of B must hold at least one block")]
    EmptyOpponent,
    #[error("ratio x={0} must be positive")]
    NonPositiveRatio(f64),
    #[error("probability p={0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("trials must be at least 1")]
    ZeroTrials,
}
