use thiserror::Error;

pub type Result<T, E = FairDivError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairDivError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at agent {agent}, item {item}")]
    NonFinite { agent: usize, item: usize },

    #[error("value {value} at agent {agent}, item {item} lies outside [{lo}, {hi}]")]
    OutOfRange {
        agent: usize,
        item: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise bound violated: max deviation {observed} exceeds eps {eps}")]
    NoiseBound { observed: f64, eps: f64 },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("observation graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbability(String),

    #[error("state space of {outcomes} outcomes exceeds the cap of {cap}")]
    StateSpace { outcomes: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),
}
