use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("gamma = 0 is the critical point, not a valid action")]
    CriticalGamma,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("chain is not ergodic: acceptance rate {rate:.2e} after tuning")]
    NonErgodic { rate: f64 },

    #[error("series too short: need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("grid refinement did not converge: {0}")]
    NotConverged(String),

    #[error("renormalization diverges: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
