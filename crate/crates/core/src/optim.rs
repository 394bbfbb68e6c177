//! Learning-rate schedules and the PG / NPG iteration loops.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::env::{check_gamma, Environment};
use crate::error::{Error, Result};
use crate::estimators::{check_xi, estimate_fisher, estimate_gradient, ridge_solve, FisherEstimate, GradEstimate};
use crate::policy::{ParamVector, Policy};
use crate::rng::seeded;

/// Step-size sequence `h_t`, `t = 1, …, T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSchedule {
    /// `h_t = λ`
    Constant { lambda: f64 },
    /// `h_t = λ T^{(β₀−1)/(β₀+1)}`
    HorizonScaled { lambda: f64, beta0: f64 },
    /// `h_t = λ t^{−q}`
    Decaying { lambda: f64, q: f64 },
}

impl RateSchedule {
    pub fn lambda(&self) -> f64 {
        match *self {
            RateSchedule::Constant { lambda }
            | RateSchedule::HorizonScaled { lambda, .. }
            | RateSchedule::Decaying { lambda, .. } => lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda() > 0.0 && self.lambda().is_finite()) {
            return Err(Error::OutOfRange {
                name: "lambda",
                range: "(0,∞)",
                value: self.lambda(),
            });
        }
        match *self {
            RateSchedule::HorizonScaled { beta0, .. } if !(beta0 > 0.0 && beta0 <= 1.0) => {
                Err(Error::OutOfRange {
                    name: "beta0",
                    range: "(0,1]",
                    value: beta0,
                })
            }
            RateSchedule::Decaying { q, .. } if !(0.0..1.0).contains(&q) => Err(Error::OutOfRange {
                name: "q",
                range: "[0,1)",
                value: q,
            }),
            _ => Ok(()),
        }
    }
}

pub fn schedule_rate(schedule: &RateSchedule, t: usize, total: usize) -> Result<f64> {
    schedule.validate()?;
    if t == 0 || t > total {
        return Err(Error::Config(format!("iteration {t} outside 1..={total}")));
    }
    Ok(match *schedule {
        RateSchedule::Constant { lambda } => lambda,
        RateSchedule::HorizonScaled { lambda, beta0 } => {
            lambda * (total as f64).powf((beta0 - 1.0) / (beta0 + 1.0))
        }
        RateSchedule::Decaying { lambda, q } => lambda * (t as f64).powf(-q),
    })
}

/// `θ + h·ĝ` (the estimate's mean already carries the 1/B).
pub fn pg_step(theta: &ParamVector, grad: &GradEstimate, h: f64) -> Result<ParamVector> {
    apply_direction(theta, &grad.mean, h)
}

/// `θ + h·(K_t + ξI)⁻¹ ĝ`.
pub fn npg_step(
    theta: &ParamVector,
    grad: &GradEstimate,
    fisher: &FisherEstimate,
    h: f64,
) -> Result<ParamVector> {
    let direction = ridge_solve(&fisher.matrix, fisher.xi, &grad.mean)?;
    apply_direction(theta, &direction, h)
}

fn apply_direction(theta: &ParamVector, direction: &DVector<f64>, h: f64) -> Result<ParamVector> {
    if direction.len() != theta.dim() {
        return Err(Error::Dimension(format!(
            "update has dimension {}, parameter has {}",
            direction.len(),
            theta.dim()
        )));
    }
    theta
        .perturbed(direction, h)
        .map_err(|_| Error::NonFinite { iteration: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pg,
    Npg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algorithm,
    /// Number of iterations T.
    pub iterations: usize,
    /// Batch size B.
    pub batch: usize,
    pub gamma: f64,
    pub schedule: RateSchedule,
    /// Ridge parameter ξ (NPG only).
    #[serde(default)]
    pub xi: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub oracle_tracking: bool,
    #[serde(default)]
    pub record_theta: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        check_gamma(self.gamma)?;
        self.schedule.validate()?;
        if self.algo == Algorithm::Npg {
            match self.xi {
                Some(xi) => check_xi(xi)?,
                None => return Err(Error::Config("xi is required when algo = npg".into())),
            }
        }
        Ok(())
    }
}

/// Exact quantities at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub grad_norm: f64,
    pub j_value: f64,
}

/// Source of exact `‖∇J(θ)‖` and `J(θ)` (available on tabular problems).
pub trait OracleTracker {
    fn track(&self, theta: &ParamVector) -> Result<TrackedPoint>;
}

/// One iteration `t`; gradients and values are evaluated at `θ_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub t: usize,
    pub h_t: f64,
    pub grad_norm_est: f64,
    pub grad_norm_exact: Option<f64>,
    pub j_exact: Option<f64>,
    pub reward_mean: f64,
    /// `θ_t` after the update, when `record_theta` is set.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
}

impl RunLog {
    /// First iteration whose batch mean reward exceeds `threshold`.
    pub fn first_reward_above(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.reward_mean > threshold)
            .map(|r| r.t)
    }

    /// First iteration whose exact gradient norm is below `threshold`.
    pub fn first_grad_norm_below(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.grad_norm_exact.is_some_and(|g| g < threshold))
            .map(|r| r.t)
    }

    /// Exact `‖∇J(θ_{t−1})‖²` per record (requires oracle tracking).
    pub fn exact_sq_grad_norms(&self) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.grad_norm_exact.map(|g| g * g))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub log: RunLog,
    pub theta: ParamVector,
    /// Iteration at which θ became non-finite; the log stops there.
    pub diverged_at: Option<usize>,
}

/// Runs `T` iterations of PG or NPG from `θ₀`. Deterministic for a fixed seed.
pub fn run<E, P>(
    config: &RunConfig,
    env: &E,
    policy: &P,
    theta0: &ParamVector,
    tracker: Option<&dyn OracleTracker>,
) -> Result<RunOutcome>
where
    E: Environment,
    P: Policy<Action = E::Action>,
{
    config.validate()?;
    policy.check_dim(theta0)?;
    if config.oracle_tracking && tracker.is_none() {
        return Err(Error::Config(
            "oracle_tracking requires an exact oracle (tabular environment)".into(),
        ));
    }
    let tracker = if config.oracle_tracking { tracker } else { None };
    let mut rng = seeded(config.seed);
    let mut theta = theta0.clone();
    let mut log = RunLog {
        records: Vec::with_capacity(config.iterations),
    };
    for t in 1..=config.iterations {
        let grad = estimate_gradient(env, policy, &theta, config.gamma, config.batch, &mut rng)?;
        let exact = tracker.map(|tr| tr.track(&theta)).transpose()?;
        let h = schedule_rate(&config.schedule, t, config.iterations)?;
        let next = match config.algo {
            Algorithm::Pg => pg_step(&theta, &grad, h),
            Algorithm::Npg => {
                let xi = config.xi.expect("validated");
                let fisher = estimate_fisher(env, policy, &theta, config.gamma, config.batch, xi, &mut rng)?;
                npg_step(&theta, &grad, &fisher, h)
            }
        };
        let next = match next {
            Ok(th) => th,
            Err(Error::NonFinite { .. }) => {
                return Ok(RunOutcome {
                    log,
                    theta,
                    diverged_at: Some(t),
                })
            }
            Err(e) => return Err(e),
        };
        log.records.push(RunRecord {
            t,
            h_t: h,
            grad_norm_est: grad.mean.norm(),
            grad_norm_exact: exact.map(|e| e.grad_norm),
            j_exact: exact.map(|e| e.j_value),
            reward_mean: grad.reward_mean,
            theta: config.record_theta.then(|| next.as_slice().to_vec()),
        });
        theta = next;
    }
    Ok(RunOutcome {
        log,
        theta,
        diverged_at: None,
    })
}
