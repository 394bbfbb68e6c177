mod common;

use common::{random_mdp, random_theta, zero_reward_chain};
use holderpg::estimators::{
    estimate_fisher, estimate_gradient, pseudo_inverse_apply, ridge_solve, sample_q,
    smallest_nonzero_eigenvalue, DEFAULT_RANK_TOL,
};
use holderpg::rng::seeded;
use holderpg::{ParamVector, SoftmaxPolicy, TabularMdp};
use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// `Σ_{i<rank} λ_i u_i u_iᵀ` with random orthonormal `u_i` (QR of a Gaussian-ish
/// matrix) and eigenvalues spread over several decades.
fn random_psd(seed: u64, dim: usize, rank: usize) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let mut k = DMatrix::zeros(dim, dim);
    for i in 0..rank {
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let u = q.column(i);
        k += u * u.transpose() * lambda;
    }
    (&k + k.transpose()) * 0.5
}

#[test]
fn ridge_examples() {
    let x = dvector![1.0, 1.0];
    let y = ridge_solve(&DMatrix::zeros(2, 2), 0.5, &x).unwrap();
    assert!((y - dvector![2.0, 2.0]).norm() < 1e-14);
    let k = DMatrix::from_diagonal(&dvector![1.0, 0.0]);
    let y = ridge_solve(&k, 0.5, &x).unwrap();
    assert!((y - dvector![2.0 / 3.0, 2.0]).norm() < 1e-14);
    let x3 = dvector![0.3, -1.2, 4.0];
    let y = ridge_solve(&DMatrix::identity(3, 3), 1.0, &x3).unwrap();
    assert!((y - &x3 / 2.0).norm() < 1e-14);
}

#[test]
fn pseudo_inverse_examples() {
    let k = DMatrix::from_diagonal(&dvector![1.0, 0.0]);
    let x = dvector![1.0, 1.0];
    let p = pseudo_inverse_apply(&k, &x, DEFAULT_RANK_TOL).unwrap();
    assert!((p - dvector![1.0, 0.0]).norm() < 1e-14);
    let gap = (ridge_solve(&k, 0.5, &x).unwrap() - pseudo_inverse_apply(&k, &x, DEFAULT_RANK_TOL).unwrap()).norm();
    assert!((gap - (1.0f64 / 9.0 + 4.0).sqrt()).abs() < 1e-12);
    assert!(gap <= 2.0 * 2f64.sqrt());
}

#[test]
fn ridge_converges_to_inverse() {
    let k = random_psd(5, 4, 4);
    let x = dvector![1.0, -2.0, 0.5, 3.0];
    let exact = pseudo_inverse_apply(&k, &x, DEFAULT_RANK_TOL).unwrap();
    let zeta = smallest_nonzero_eigenvalue(&k, DEFAULT_RANK_TOL).unwrap();
    for xi in [1e-4, 1e-6, 1e-8] {
        let err = (ridge_solve(&k, xi, &x).unwrap() - &exact).norm();
        // ‖(K+ξI)⁻¹x − K⁻¹x‖ ≤ ξ‖x‖/ζ².
        assert!(err <= xi * x.norm() / (zeta * zeta) * (1.0 + 1e-6) + 1e-12, "ξ = {xi}: {err}");
    }
}

#[test]
fn ridge_rejects_asymmetric() {
    let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(ridge_solve(&k, 0.1, &dvector![1.0, 1.0]).is_err());
}

#[test]
fn zero_reward_gradient_is_exactly_zero() {
    let mdp = zero_reward_chain(0.9);
    let pol = SoftmaxPolicy::tabular(2, 2);
    let g = estimate_gradient(&mdp, &pol, &random_theta(3, 4, 1.0), 0.9, 64, &mut seeded(3)).unwrap();
    assert!(g.mean.iter().all(|x| *x == 0.0));
}

#[test]
fn zero_discount_q_sample_is_first_reward() {
    let mdp = TabularMdp::two_state_chain(0.5).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let mut rng = seeded(4);
    for _ in 0..200 {
        let q = sample_q(&mdp, &pol, &ParamVector::zeros(4), 0.0, &mut rng).unwrap();
        assert_eq!((q.horizon_j, q.tail_length), (0, 0));
        assert_eq!(q.v, mdp.reward(q.state, q.action));
    }
}

#[test]
fn q_samples_respect_the_bound() {
    let mdp = random_mdp(6, 3, 2, 0.95);
    let pol = SoftmaxPolicy::tabular(3, 2);
    let bound = mdp.alpha() / (1.0 - 0.95f64.sqrt());
    let mut rng = seeded(6);
    for _ in 0..5000 {
        let q = sample_q(&mdp, &pol, &random_theta(6, 6, 1.0), 0.95, &mut rng).unwrap();
        assert!(q.v.abs() <= bound);
    }
}

#[test]
fn half_discount_weights() {
    // Single state, reward 1: v = Σ_{k=0}^{h} γ^{k/2} given the tail length h.
    let mdp = TabularMdp::from_nested(&[vec![vec![1.0]]], &[vec![1.0]], 0.81, vec![1.0], 1.0).unwrap();
    let pol = SoftmaxPolicy::tabular(1, 1);
    let mut rng = seeded(9);
    for _ in 0..500 {
        let q = sample_q(&mdp, &pol, &ParamVector::zeros(1), 0.81, &mut rng).unwrap();
        let expected: f64 = (0..=q.tail_length).map(|k| 0.9f64.powi(k as i32)).sum();
        assert!((q.v - expected).abs() < 1e-12);
    }
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let mdp = random_mdp(11, 3, 2, 0.9);
    let pol = SoftmaxPolicy::tabular(3, 2);
    let theta = random_theta(11, 6, 1.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let mut rng = seeded(99);
                let g = estimate_gradient(&mdp, &pol, &theta, 0.9, 300, &mut rng).unwrap();
                let k = estimate_fisher(&mdp, &pol, &theta, 0.9, 300, 0.1, &mut rng).unwrap();
                (g, k)
            })
    };
    let (g1, k1) = run(1);
    let (g4, k4) = run(4);
    assert_eq!(g1, g4);
    assert_eq!(k1, k4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ridge_pseudo_inverse_gap(seed in any::<u64>(), dim in 1usize..=8, rank_frac in 0.0f64..=1.0, xi_idx in 0usize..3) {
        let rank = (rank_frac * dim as f64).round() as usize;
        let xi = [0.01, 0.1, 1.0][xi_idx];
        let k = random_psd(seed, dim, rank);
        let mut rng = seeded(seed.wrapping_add(1));
        let x = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let gap = (ridge_solve(&k, xi, &x).unwrap() - pseudo_inverse_apply(&k, &x, DEFAULT_RANK_TOL).unwrap()).norm();
        let bound = match smallest_nonzero_eigenvalue(&k, DEFAULT_RANK_TOL) {
            Some(zeta) => (1.0 / zeta).max(1.0 / xi),
            None => 1.0 / xi,
        } * x.norm();
        prop_assert!(gap <= bound + 1e-9, "gap {gap} > bound {bound}");
    }

    #[test]
    fn ridge_residual(seed in any::<u64>(), dim in 1usize..=8, xi in 1e-3f64..=1.0) {
        let k = random_psd(seed, dim, dim);
        let x = DVector::from_fn(dim, |i, _| (i as f64 + 1.0).sin());
        let y = ridge_solve(&k, xi, &x).unwrap();
        let shifted = &k + DMatrix::identity(dim, dim) * xi;
        prop_assert!((shifted * y - &x).norm() <= 1e-10 * x.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fisher_estimates_are_symmetric_psd_and_bounded(seed in any::<u64>(), batch in 1usize..64) {
        let mdp = random_mdp(seed, 3, 3, 0.8);
        let pol = SoftmaxPolicy::tabular(3, 3);
        let theta = random_theta(seed, 9, 2.0);
        let f = estimate_fisher(&mdp, &pol, &theta, 0.8, batch, 0.5, &mut seeded(seed)).unwrap();
        prop_assert!(f.is_symmetric());
        prop_assert!(f.min_eigenvalue() >= -1e-10);
        // ‖ψ‖² ≤ 2 for the one-hot softmax score (1 − π_a)² + Σ_{b≠a} π_b² ≤ 2.
        let op = nalgebra::SymmetricEigen::new(f.matrix.clone()).eigenvalues.max();
        prop_assert!(op <= 2.0 + 1e-12);
    }

    #[test]
    fn gradient_estimates_are_reproducible(seed in any::<u64>()) {
        let mdp = random_mdp(seed, 2, 2, 0.9);
        let pol = SoftmaxPolicy::tabular(2, 2);
        let theta = random_theta(seed, 4, 1.0);
        let a = estimate_gradient(&mdp, &pol, &theta, 0.9, 50, &mut seeded(seed)).unwrap();
        let b = estimate_gradient(&mdp, &pol, &theta, 0.9, 50, &mut seeded(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
