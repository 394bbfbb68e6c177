use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::env::{sample_trajectory, TabularMdp};
use crate::error::{Error, Result};
use crate::oracle::{policy_matrix, state_transition};
use crate::policy::{DiscretePolicy, ParamVector};
use crate::rng::par_substreams;
use crate::stats::{linear_fit, total_variation};

/// TV floor below which exact distances are treated as converged and left out
/// of the geometric fit.
const EXACT_TV_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    pub steps: Vec<usize>,
    pub tv_to_limit: Vec<f64>,
    /// Slope of `log TV` against `n` (≈ `log δ`); `None` without two usable points.
    pub fitted_log_decay: Option<f64>,
    /// `exp(intercept)` of the same fit (≈ `C₀`).
    pub fitted_c0: Option<f64>,
    /// TV did not shrink over the scan (reducible or periodic chain).
    pub non_decaying: bool,
    /// Number of sampled trajectories, `None` for the exact probe.
    pub trials: Option<usize>,
}

/// Stationary law of a row-stochastic matrix: solves `πᵀ(P − I) = 0` with
/// `Σπ = 1` by replacing the last balance equation with the normalization.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("stationary law is not unique".into()))?;
    Ok(pi.map(|x| x.max(0.0)))
}

fn report(tv: Vec<f64>, floor: f64, trials: Option<usize>) -> ErgodicityReport {
    let steps: Vec<usize> = (0..tv.len()).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = steps
        .iter()
        .zip(&tv)
        .filter(|(_, t)| **t > floor)
        .map(|(n, t)| (*n as f64, t.ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys);
    let first = tv[0];
    let last = *tv.last().expect("n_max ≥ 1");
    let non_decaying = first > floor && last > floor && last >= 0.5 * first;
    ErgodicityReport {
        steps,
        fitted_log_decay: fit.map(|f| f.slope),
        fitted_c0: fit.map(|f| f.intercept.exp()),
        tv_to_limit: tv,
        non_decaying,
        trials,
    }
}

/// Exact `TV(ρ P_π^n, ρ*)` for `n = 0..=n_max` on a tabular MDP, with a
/// geometric fit. A periodic or reducible chain is reported through
/// `non_decaying`, not raised.
pub fn probe_ergodicity<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    n_max: usize,
) -> Result<ErgodicityReport> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let p = state_transition(mdp, &policy_matrix(mdp, policy, theta)?);
    let limit = stationary_distribution(&p)?;
    let mut law = DVector::from_column_slice(mdp.init_dist());
    let pt = p.transpose();
    let mut tv = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        tv.push(total_variation(law.as_slice(), limit.as_slice()).clamp(0.0, 1.0));
        law = &pt * law;
    }
    Ok(report(tv, EXACT_TV_FLOOR, None))
}

/// Empirical variant: histograms the state at each step over `trials`
/// independent trajectories and compares with the exact stationary law. TV
/// values at or below `floor` (the sampling noise level, roughly
/// `√(|S|/trials)`) are left out of the fit.
pub fn probe_ergodicity_sampled<P, R>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    n_max: usize,
    trials: usize,
    floor: f64,
    rng: &mut R,
) -> Result<ErgodicityReport>
where
    P: DiscretePolicy,
    R: Rng + ?Sized,
{
    if n_max == 0 || trials == 0 {
        return Err(Error::Config("n_max and trials must be at least 1".into()));
    }
    let p = state_transition(mdp, &policy_matrix(mdp, policy, theta)?);
    let limit = stationary_distribution(&p)?;
    let paths = par_substreams(rng, trials, |_, sub| {
        sample_trajectory(mdp, policy, theta, n_max + 1, sub).map(|t| t.states)
    });
    let mut counts = vec![vec![0usize; mdp.n_states()]; n_max + 1];
    for path in paths {
        for (n, s) in path?.into_iter().enumerate() {
            counts[n][s] += 1;
        }
    }
    let tv = counts
        .iter()
        .map(|c| {
            let emp: Vec<f64> = c.iter().map(|k| *k as f64 / trials as f64).collect();
            total_variation(&emp, limit.as_slice())
        })
        .collect();
    Ok(report(tv, floor, Some(trials)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::SoftmaxPolicy;
    use crate::rng::seeded;

    fn single_action_chain(p: [[f64; 2]; 2], rho: Vec<f64>) -> TabularMdp {
        TabularMdp::from_nested(
            &[vec![p[0].to_vec()], vec![p[1].to_vec()]],
            &[vec![0.0], vec![1.0]],
            0.9,
            rho,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn second_eigenvalue_recovered() {
        let mdp = single_action_chain([[0.7, 0.3], [0.3, 0.7]], vec![1.0, 0.0]);
        let pol = SoftmaxPolicy::tabular(2, 1);
        let r = probe_ergodicity(&mdp, &pol, &ParamVector::zeros(2), 20).unwrap();
        assert!((r.fitted_log_decay.unwrap() - 0.4f64.ln()).abs() < 1e-6);
        assert!((r.fitted_c0.unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(r.tv_to_limit[0], 0.5);
        assert!(!r.non_decaying);
    }

    #[test]
    fn stationary_start_stays_put() {
        let mdp = single_action_chain([[0.2, 0.8], [0.8, 0.2]], vec![0.5, 0.5]);
        let pol = SoftmaxPolicy::tabular(2, 1);
        let r = probe_ergodicity(&mdp, &pol, &ParamVector::zeros(2), 10).unwrap();
        assert!(r.tv_to_limit.iter().all(|t| *t < 1e-15));
    }

    #[test]
    fn periodic_chain_flagged() {
        let mdp = single_action_chain([[0.0, 1.0], [1.0, 0.0]], vec![1.0, 0.0]);
        let pol = SoftmaxPolicy::tabular(2, 1);
        let r = probe_ergodicity(&mdp, &pol, &ParamVector::zeros(2), 10).unwrap();
        assert!(r.non_decaying);
    }

    #[test]
    fn sampled_probe_tracks_exact() {
        let mdp = single_action_chain([[0.7, 0.3], [0.3, 0.7]], vec![1.0, 0.0]);
        let pol = SoftmaxPolicy::tabular(2, 1);
        let theta = ParamVector::zeros(2);
        let r = probe_ergodicity_sampled(&mdp, &pol, &theta, 6, 200_000, 0.01, &mut seeded(1)).unwrap();
        let exact = probe_ergodicity(&mdp, &pol, &theta, 6).unwrap();
        for (a, b) in r.tv_to_limit.iter().zip(&exact.tv_to_limit) {
            assert!((a - b).abs() < 0.005);
        }
        assert!((r.fitted_log_decay.unwrap() - 0.4f64.ln()).abs() < 0.1);
    }
}
