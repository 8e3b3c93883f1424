use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("block count {blocks} does not divide length {len}")]
    BlockMismatch { len: usize, blocks: usize },

    #[error("spin values must be +1 or -1, found {0}")]
    InvalidSpin(i64),

    #[error("length must be positive")]
    Empty,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid channel (p={p}, r={r}): {reason}")]
    InvalidChannel {
        p: f64,
        r: f64,
        reason: &'static str,
    },

    #[error("invalid source bias {0}: must lie in [0, 1]")]
    InvalidSource(f64),

    #[error("{name}={value} is outside its domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("target output bias {target} is not attainable by {network}")]
    Unattainable { target: f64, network: String },

    #[error("numerical breakdown at step {step}: V={v:e} for factor {mu}, unit {unit}")]
    NumericalBreakdown {
        step: usize,
        mu: usize,
        unit: usize,
        v: f64,
    },

    #[error("exhaustive enumeration over {bits} bits exceeds the budget of {max_bits}")]
    BudgetExceeded { bits: usize, max_bits: usize },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
