use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient at exponent {exp} is beyond the truncation order {order}")]
    Truncated { exp: String, order: String },
    #[error("division by zero")]
    ZeroDivision,
    #[error("value not representable in the exact ring: {0}")]
    NotRepresentable(String),
    #[error("invalid leading term: {0}")]
    LeadingTerm(String),
    #[error("incompatible coefficient rings")]
    RingMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("argument hits a pole: {0}")]
    Pole(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("memory budget exceeded: {required} bytes required, {budget} allowed")]
    Memory { required: u64, budget: u64 },
    #[error("ill-conditioned design matrix (condition number {0:e})")]
    IllConditioned(f64),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
