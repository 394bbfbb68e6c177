//! Policy gradient (PG) and ridge-stabilized natural policy gradient (NPG) for
//! exponential policy classes whose score is only Hölder continuous.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: tabular MDPs, the 1-D exploration bandit, trajectory and
//!   discounted-visitation sampling.
//! - [`policy`]: exponential policies `π_θ ∝ exp(ν_θ)` (tabular/linear softmax,
//!   generalized Gaussian, safe log-barrier) with log-density, score and sampling.
//! - [`estimators`]: geometric-horizon Q samples, minibatch gradient and Fisher
//!   estimates, ridge solve and pseudo-inverse.
//! - [`optim`]: learning-rate schedules and the PG / NPG loops.
//! - [`oracle`]: exact computations on tabular MDPs used as ground truth.
//! - [`diagnostics`]: empirical probes for smoothness, score moments, ergodicity,
//!   gradient noise, gradient domination and convergence rates.
//!
//! Every sampling routine takes an explicit RNG; see [`rng`] for the seeding
//! scheme that keeps parallel batches bit-reproducible.

pub mod diagnostics;
pub mod env;
pub mod error;
pub mod estimators;
pub mod optim;
pub mod oracle;
pub mod policy;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use env::{Environment, ExplorationBandit, TabularMdp, TrajectorySample, VisitationDraw};
pub use error::{Error, Result};
pub use estimators::{FisherEstimate, GradEstimate, QSample};
pub use optim::{Algorithm, RateSchedule, RunConfig, RunLog, RunOutcome};
pub use oracle::OracleReport;
pub use policy::{
    DiscretePolicy, GeneralizedGaussian, ParamVector, Policy, PolicySpec, SafeLogBarrier, Score,
    SmoothnessSpec, SoftmaxPolicy,
};
