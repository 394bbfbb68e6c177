mod common;

use common::random_theta;
use holderpg::env::{exploration_reward, geom_draw, sample_trajectory, sample_visitation};
use holderpg::estimators::{estimate_fisher, estimate_gradient, sample_q};
use holderpg::oracle::{exact_fisher, exact_gradient, exact_q, exact_visitation, scaled_gradient};
use holderpg::rng::seeded;
use holderpg::stats::{total_variation, SummaryStats};
use holderpg::{ExplorationBandit, GeneralizedGaussian, ParamVector, SoftmaxPolicy, TabularMdp};
use nalgebra::DMatrix;

#[test]
fn geometric_cdf_ks() {
    let n = 100_000;
    for p in [0.05, 0.5, 0.95] {
        let mut rng = seeded((p * 100.0) as u64);
        let mut draws: Vec<u64> = (0..n).map(|_| geom_draw(p, &mut rng).unwrap()).collect();
        draws.sort_unstable();
        let max_k = *draws.last().unwrap();
        let mut ks: f64 = 0.0;
        let mut idx = 0;
        for k in 0..=max_k {
            while idx < draws.len() && draws[idx] <= k {
                idx += 1;
            }
            let cdf = 1.0 - (1.0 - p).powi(k as i32 + 1);
            ks = ks.max((idx as f64 / n as f64 - cdf).abs());
        }
        assert!(ks < 0.01, "p = {p}: KS = {ks}");
    }
}

#[test]
fn geometric_moments() {
    let mut rng = seeded(1);
    let s: SummaryStats = (0..1_000_000).map(|_| geom_draw(0.1, &mut rng).unwrap() as f64).collect();
    assert!((s.mean - 9.0).abs() < 3.0 * s.std_error());
    let n = 100_000;
    let zeros = (0..n).filter(|_| geom_draw(0.5, &mut rng).unwrap() == 0).count() as f64 / n as f64;
    assert!((zeros - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    assert!(geom_draw(0.0, &mut rng).is_err());
    assert!(geom_draw(1.5, &mut rng).is_err());
    assert!((0..100).all(|_| geom_draw(1.0, &mut rng).unwrap() == 0));
}

#[test]
fn visitation_histogram_matches_oracle() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = ParamVector::new(vec![0.4, -0.3, 0.1, 0.6]).unwrap();
    let exact = exact_visitation(&mdp, &pol, &theta).unwrap();
    let mut rng = seeded(2);
    let n = 1_000_000;
    let mut hist = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let d = sample_visitation(&mdp, &pol, &theta, 0.9, &mut rng).unwrap();
        hist[(d.state, d.action)] += 1.0 / n as f64;
    }
    assert!(total_variation(hist.as_slice(), exact.as_slice()) < 0.01);
}

#[test]
fn visitation_horizon_mean() {
    let mdp = TabularMdp::two_state_chain(0.5).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let mut rng = seeded(3);
    let s: SummaryStats = (0..100_000)
        .map(|_| sample_visitation(&mdp, &pol, &ParamVector::zeros(4), 0.5, &mut rng).unwrap().horizon_j as f64)
        .collect();
    assert!((s.mean - 1.0).abs() < 3.0 * s.std_error());
    for _ in 0..100 {
        assert_eq!(sample_visitation(&mdp, &pol, &ParamVector::zeros(4), 0.0, &mut rng).unwrap().horizon_j, 0);
    }
}

#[test]
fn trajectory_state_frequencies() {
    // Under the uniform policy both rows of P_π are (1/2, 1/2): the stationary
    // law is uniform and successive states are independent.
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let n = 100_000;
    let t = sample_trajectory(&mdp, &pol, &ParamVector::zeros(4), n, &mut seeded(4)).unwrap();
    assert_eq!(t.len(), n);
    assert_eq!(t.actions.len(), n);
    assert_eq!(t.rewards.len(), n);
    let freq = t.states.iter().filter(|s| **s == 0).count() as f64 / n as f64;
    assert!((freq - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
}

#[test]
fn bandit_single_step() {
    let env = ExplorationBandit::new(3.9);
    let pol = GeneralizedGaussian::location(1.2).unwrap();
    let mut rng = seeded(5);
    for _ in 0..100 {
        let t = sample_trajectory(&env, &pol, &ParamVector::new(vec![3.5]).unwrap(), 1, &mut rng).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rewards[0], exploration_reward(t.actions[0], 3.9));
    }
}

#[test]
fn q_samples_unbiased_per_cell() {
    let mdp = TabularMdp::two_state_chain(0.8).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = ParamVector::new(vec![0.2, -0.2, 0.5, 0.0]).unwrap();
    let q = exact_q(&mdp, &pol, &theta).unwrap();
    let mut cells = vec![SummaryStats::default(); 4];
    let mut rng = seeded(6);
    for _ in 0..200_000 {
        let s = sample_q(&mdp, &pol, &theta, 0.8, &mut rng).unwrap();
        cells[s.state * 2 + s.action].push(s.v);
    }
    for (i, c) in cells.iter().enumerate() {
        let exact = q[(i / 2, i % 2)];
        assert!((c.mean - exact).abs() < 3.5 * c.std_error(), "cell {i}: {} vs {exact}", c.mean);
    }
}

#[test]
fn q_matches_truncated_rollouts() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let q = exact_q(&mdp, &SoftmaxPolicy::tabular(2, 2), &ParamVector::zeros(4)).unwrap();
    // Independent simulation: take action 0 in state 0, then act uniformly at
    // random (the policy at θ = 0) for 300 more steps.
    let mut rng = seeded(7);
    let horizon = 300;
    let s: SummaryStats = (0..20_000)
        .map(|_| {
            let mut ret = mdp.reward(0, 0);
            let p = mdp.transition_row(0, 0)[0];
            let mut state = if rand::Rng::random::<f64>(&mut rng) < p { 0 } else { 1 };
            let mut disc = 0.9;
            for _ in 0..horizon {
                let a = if rand::Rng::random::<bool>(&mut rng) { 1 } else { 0 };
                ret += disc * mdp.reward(state, a);
                let p0 = mdp.transition_row(state, a)[0];
                state = if rand::Rng::random::<f64>(&mut rng) < p0 { 0 } else { 1 };
                disc *= 0.9;
            }
            ret
        })
        .collect();
    assert!((s.mean - q[(0, 0)]).abs() < 3.0 * s.std_error() + 0.9f64.powi(300) * 10.0);
}

#[test]
fn gradient_estimator_unbiased() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = random_theta(8, 4, 0.5);
    let target = scaled_gradient(&mdp, &pol, &theta).unwrap();
    let grad = exact_gradient(&mdp, &pol, &theta).unwrap();
    assert!((&target - &grad * 0.1).norm() < 1e-12);
    let mut rng = seeded(8);
    let mut comps = vec![SummaryStats::default(); 4];
    for _ in 0..100 {
        let g = estimate_gradient(&mdp, &pol, &theta, 0.9, 500, &mut rng).unwrap();
        for i in 0..4 {
            comps[i].push(g.mean[i]);
        }
    }
    for i in 0..4 {
        assert!((comps[i].mean - target[i]).abs() < 3.5 * comps[i].std_error());
    }
}

#[test]
fn fisher_estimator_unbiased() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = random_theta(9, 4, 0.5);
    let exact = exact_fisher(&mdp, &pol, &theta).unwrap();
    let mut rng = seeded(9);
    let mut entries = vec![SummaryStats::default(); 16];
    for _ in 0..200 {
        let k = estimate_fisher(&mdp, &pol, &theta, 0.9, 200, 0.1, &mut rng).unwrap();
        for (i, x) in k.matrix.iter().enumerate() {
            entries[i].push(*x);
        }
    }
    for (i, e) in entries.iter().enumerate() {
        assert!((e.mean - exact.as_slice()[i]).abs() < 3.5 * e.std_error() + 1e-12, "entry {i}");
    }
}

#[test]
fn gradient_variance_scales_with_batch() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = random_theta(10, 4, 0.5);
    let target = scaled_gradient(&mdp, &pol, &theta).unwrap();
    let mut rng = seeded(10);
    let mut var = |b: usize| {
        let s: SummaryStats = (0..2000)
            .map(|_| (estimate_gradient(&mdp, &pol, &theta, 0.9, b, &mut rng).unwrap().mean - &target).norm_squared())
            .collect();
        s.mean
    };
    let ratio = var(25) / var(100);
    assert!((ratio - 4.0).abs() < 1.0, "ratio {ratio}");
}
