use thiserror::Error;

use crate::covariance::ValidityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is evaluated at lags >= 1, got lag 0")]
    ZeroLag,

    #[error("lag {lag} lies past the end of the table ({len} entries) and the tail rule rejects extension")]
    OutsideTable { lag: u64, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance does not satisfy the sufficient validity conditions: {0}")]
    InvalidCovariance(Box<ValidityReport>),

    #[error("negative gap probability {value:e} at k = {k}; the (p, C) pair does not define a binary sequence at this horizon")]
    NegativeGapProbability { k: usize, value: f64 },

    #[error("enumeration size guard exceeded: {what} has {size} elements, limit is {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionCapExceeded { attempts: usize },

    #[error("set cannot be represented: {0}")]
    NotRepresentable(String),

    #[error("quadrature did not converge on ({lo}, {hi}): estimated error {error:e}")]
    Quadrature { lo: f64, hi: f64, error: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("lattice of {cells} cells exceeds the budget of {budget}")]
    LatticeBudget { cells: usize, budget: usize },
}
