use thiserror::Error;

/// Errors raised by environment construction, policy evaluation, estimators and oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("transition row P[{state}][{action}] sums to {sum} ≠ 1")]
    RowSum { state: usize, action: usize, sum: f64 },

    #[error("negative transition probability at P[{state}][{action}][{next}] = {value}")]
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },

    #[error("reward r[{state}][{action}] = {value} exceeds the bound alpha = {alpha}")]
    RewardBound {
        state: usize,
        action: usize,
        value: f64,
        alpha: f64,
    },

    #[error("initial distribution invalid: {0}")]
    InitialDistribution(String),

    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("non-finite normalizer: {0}")]
    NonFiniteNormalizer(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("gradient validation failed: analytic and finite-difference gradients differ by relative error {rel_err:e}")]
    GradientValidation { rel_err: f64 },

    #[error("non-finite parameter at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit window too short: {got} points, need at least {need}")]
    WindowTooShort { got: usize, need: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
