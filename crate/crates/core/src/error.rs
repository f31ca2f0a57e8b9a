use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("channel gains must be strictly ascending and non-negative (index {index})")]
    ChannelOrdering { index: usize },

    #[error("channel probability at index {index} is not positive: {value}")]
    ChannelProbability { index: usize, value: f64 },

    #[error("channel pmf sums to {sum}, expected 1")]
    PmfSum { sum: f64 },

    #[error("infeasible action: transmit energy {transmit} exceeds available energy {available}")]
    Infeasible { transmit: f64, available: f64 },

    #[error("policy returned an infeasible action at block {block} (energy {energy}, channel {channel_index}): {reason}")]
    PolicyViolation {
        block: u64,
        energy: f64,
        channel_index: usize,
        reason: String,
    },

    #[error("evaluation system is singular or ill-conditioned (condition {condition:e}); rule may be multichain: {rule:?}")]
    MultichainSuspected { condition: f64, rule: Vec<usize> },

    #[error("policy iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("brute-force enumeration needs {rules} rules, budget is {budget}")]
    EnumerationBudget { rules: f64, budget: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
