use rand::Rng;

use crate::env::{Environment, TabularMdp};
use crate::error::{Error, Result};
use crate::estimators::estimate_gradient;
use crate::oracle::{psi_infty, scaled_gradient};
use crate::policy::{DiscretePolicy, ParamVector};
use crate::stats::SummaryStats;

/// Minibatch gradient noise `e_t = ĝ − E[ĝ]` against the bound
/// `σ²/((1−γ)²B)`, `σ = 3α√ψ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub batch: usize,
    pub repeats: usize,
    /// Empirical `E‖e_t‖²`.
    pub mean_sq_error: f64,
    pub std_error: f64,
    pub psi_infty: f64,
    pub sigma: f64,
    pub bound: f64,
}

impl NoiseReport {
    pub fn within_bound(&self) -> bool {
        self.mean_sq_error <= self.bound
    }
}

/// Draws `repeats` independent minibatch estimates of size `batch` and measures
/// their squared distance to the estimator's exact expectation `E_d[Qψ]`.
pub fn probe_grad_noise<P, R>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    batch: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<NoiseReport>
where
    P: DiscretePolicy,
    R: Rng + ?Sized,
{
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let gamma = mdp.gamma();
    let target = scaled_gradient(mdp, policy, theta)?;
    let mut errs = SummaryStats::default();
    for _ in 0..repeats {
        let est = estimate_gradient(mdp, policy, theta, gamma, batch, rng)?;
        errs.push((est.mean - &target).norm_squared());
    }
    let psi = psi_infty(mdp, policy, theta)?;
    let sigma = 3.0 * mdp.reward_bound() * psi.sqrt();
    Ok(NoiseReport {
        batch,
        repeats,
        mean_sq_error: errs.mean,
        std_error: errs.std_error(),
        psi_infty: psi,
        sigma,
        bound: sigma * sigma / ((1.0 - gamma).powi(2) * batch as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::SoftmaxPolicy;
    use crate::rng::seeded;

    #[test]
    fn zero_reward_has_no_noise() {
        let mdp = TabularMdp::from_nested(
            &[vec![vec![0.5, 0.5], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![0.3, 0.7]]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            0.8,
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let pol = SoftmaxPolicy::tabular(2, 2);
        let r = probe_grad_noise(&mdp, &pol, &ParamVector::zeros(4), 10, 20, &mut seeded(0)).unwrap();
        assert_eq!(r.mean_sq_error, 0.0);
    }

    #[test]
    fn variance_scales_inversely_with_batch() {
        let mdp = TabularMdp::two_state_chain(0.9).unwrap();
        let pol = SoftmaxPolicy::tabular(2, 2);
        let theta = ParamVector::new(vec![0.2, -0.1, 0.4, 0.0]).unwrap();
        let mut rng = seeded(12);
        let small = probe_grad_noise(&mdp, &pol, &theta, 50, 2000, &mut rng).unwrap();
        let large = probe_grad_noise(&mdp, &pol, &theta, 100, 2000, &mut rng).unwrap();
        let ratio = small.mean_sq_error / large.mean_sq_error;
        assert!((ratio - 2.0).abs() < 0.5, "ratio {ratio}");
        assert!(small.within_bound() && large.within_bound());
    }
}
