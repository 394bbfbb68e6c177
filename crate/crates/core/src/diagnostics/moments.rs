use rand::Rng;

use crate::env::{sample_visitation, Environment};
use crate::error::{Error, Result};
use crate::policy::{ParamVector, Policy};
use crate::rng::par_substreams;

/// Running statistics of `‖ψ_θ(s, a)‖` over `(s, a) ∼ d_θ^ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub sample_counts: Vec<usize>,
    /// `(1/N) Σ_{n≤N} ‖ψ_n‖²`
    pub running_l2: Vec<f64>,
    /// `max_{n≤N} ‖ψ_n‖`
    pub running_max: Vec<f64>,
    /// Standard error of `running_l2` at each checkpoint.
    pub l2_std_error: Vec<f64>,
}

/// Streams `n_max` visitation draws and records the running L2 average and the
/// running max of the score norm at each checkpoint.
pub fn probe_moments<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    n_max: usize,
    checkpoints: &[usize],
    rng: &mut R,
) -> Result<MomentReport>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("checkpoints must be non-empty and increasing".into()));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > n_max {
        return Err(Error::Config(format!("checkpoints must lie in 1..={n_max}")));
    }
    policy.check_dim(theta)?;
    let sq_norms = par_substreams(rng, n_max, |_, sub| -> Result<f64> {
        let d = sample_visitation(env, policy, theta, gamma, sub)?;
        Ok(policy.score(theta, d.state, &d.action)?.grad.norm_squared())
    });

    let mut report = MomentReport {
        sample_counts: checkpoints.to_vec(),
        running_l2: Vec::with_capacity(checkpoints.len()),
        running_max: Vec::with_capacity(checkpoints.len()),
        l2_std_error: Vec::with_capacity(checkpoints.len()),
    };
    let mut next = checkpoints.iter().peekable();
    let (mut sum, mut sum_sq, mut max_sq) = (0.0, 0.0, 0.0f64);
    for (i, x) in sq_norms.into_iter().enumerate() {
        let x = x?;
        sum += x;
        sum_sq += x * x;
        max_sq = max_sq.max(x);
        let n = i + 1;
        if next.peek() == Some(&&n) {
            next.next();
            let nf = n as f64;
            let mean = sum / nf;
            let var = if n > 1 {
                ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
            } else {
                0.0
            };
            report.running_l2.push(mean);
            report.running_max.push(max_sq.sqrt());
            report.l2_std_error.push((var / nf).sqrt());
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(report)
}
