use thiserror::Error;

/// Everything that can go wrong while constructing or querying a weaver
/// distribution, or while simulating exponential sampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeaverError {
    #[error("probability {0} must lie strictly inside (0, 1)")]
    InvalidProbability(String),

    #[error("depth n = {n} is invalid: {reason}")]
    InvalidDepth { n: u32, reason: &'static str },

    #[error("leaf index {k} is out of range for depth {n} (expected 0..={max})")]
    OutOfRange { k: u128, n: u32, max: u128 },

    #[error("depth {n} exceeds the materialization cap of {cap}")]
    Capacity { n: u32, cap: u32 },

    #[error("dyadic point at depth {point_depth} is not yet stable at construction depth {n}")]
    Refinement { point_depth: u32, n: u32 },

    #[error("parent populations share the mean {0}; no fluctuation between centres is possible")]
    DegenerateParents(f64),

    #[error("parent populations are not standardized: means are {mean0} and {mean1}, expected 0 and 1")]
    Unstandardized { mean0: f64, mean1: f64 },

    #[error("invalid parent distribution: {0}")]
    InvalidParent(String),

    #[error("p = {0} is closer to 0 or 1 than the 128-bit generator resolution")]
    BelowResolution(String),

    #[error("at least {min} replications are required, got {got}")]
    TooFewReplications { min: usize, got: usize },

    #[error("cannot parse {input:?} as a rational number")]
    Parse { input: String },
}

pub type Result<T> = std::result::Result<T, WeaverError>;
