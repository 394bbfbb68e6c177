mod common;

use common::random_theta;
use holderpg::quadrature::{integrate, integrate_with_breaks, Tolerance};
use holderpg::rng::seeded;
use holderpg::{DiscretePolicy, GeneralizedGaussian, ParamVector, Policy, SafeLogBarrier, SoftmaxPolicy};
use proptest::prelude::*;

fn th(v: f64) -> ParamVector {
    ParamVector::new(vec![v]).unwrap()
}

#[test]
fn softmax_uniform_at_zero() {
    let pol = SoftmaxPolicy::tabular(3, 4);
    let z = ParamVector::zeros(12);
    for a in 0..4 {
        assert!((pol.log_density(&z, 1, &a).unwrap() - (0.25f64).ln()).abs() < 1e-15);
    }
    let s = pol.score(&z, 1, &2).unwrap().grad;
    for i in 0..12 {
        let expected = match i {
            6 => 0.75,
            4 | 5 | 7 => -0.25,
            _ => 0.0,
        };
        assert!((s[i] - expected).abs() < 1e-15);
    }
}

#[test]
fn softmax_sampling_frequencies() {
    let pol = SoftmaxPolicy::tabular(1, 4);
    let z = ParamVector::zeros(4);
    let mut rng = seeded(17);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[pol.sample_action(&z, 0, &mut rng).unwrap()] += 1;
    }
    let se = (0.25f64 * 0.75 / n as f64).sqrt();
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * se);
    }
}

#[test]
fn generalized_gaussian_sampler_matches_quadrature_cdf() {
    // Kolmogorov–Smirnov distance between 50k draws and the quadrature CDF.
    let gg = GeneralizedGaussian::location(1.2).unwrap();
    let theta = th(0.7);
    let mut rng = seeded(23);
    let mut xs: Vec<f64> = (0..50_000).map(|_| gg.sample_action(&theta, 0, &mut rng).unwrap()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, x) in xs.iter().enumerate().step_by(97) {
        let cdf = gg.region_probability(&theta, 0, f64::NEG_INFINITY, *x).unwrap();
        ks = ks.max((cdf - i as f64 / n).abs()).max((cdf - (i + 1) as f64 / n).abs());
    }
    // 1.63/√n is the 1% critical value.
    assert!(ks < 1.63 / n.sqrt(), "KS = {ks}");
}

#[test]
fn safe_policy_two_d_matches_cartesian_quadrature() {
    // Independent oracle: nested 1-D quadrature over the disk in Cartesian
    // coordinates, against the polar closed-form moments.
    let phi = [0.3, -0.2];
    let pol = SafeLogBarrier::new(phi.to_vec()).unwrap();
    let t = -0.5;
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-10,
        max_intervals: 2000,
    };
    let inner = |x: f64, g: &dyn Fn(f64) -> f64| {
        let h = (1.0 - x * x).max(0.0).sqrt();
        integrate_with_breaks(|y| g(((x - phi[0]).powi(2) + (y - phi[1]).powi(2)).sqrt()), -h, h, &[phi[1]], tol)
            .unwrap()
    };
    let outer = |g: &dyn Fn(f64) -> f64| {
        integrate_with_breaks(|x| inner(x, g), -1.0, 1.0, &[phi[0]], tol).unwrap()
    };
    let z = outer(&|r: f64| r.powf(-t));
    let zl = outer(&|r: f64| if r > 0.0 { r.powf(-t) * r.ln() } else { 0.0 });
    let (log_z, mean_log) = pol.moments(&th(t)).unwrap();
    assert!((log_z - z.ln()).abs() < 1e-6, "{log_z} vs {}", z.ln());
    assert!((mean_log - zl / z).abs() < 1e-6, "{mean_log} vs {}", zl / z);
}

#[test]
fn safe_policy_score_is_unbounded() {
    let pol = SafeLogBarrier::new(vec![0.0, 0.0]).unwrap();
    let t = th(0.0);
    let near: Vec<f64> = [1e-2, 1e-4, 1e-8]
        .iter()
        .map(|r| pol.score(&t, 0, &vec![*r, 0.0]).unwrap().grad[0])
        .collect();
    assert!(near[0] < near[1] && near[1] < near[2]);
    assert!(near[2] > 15.0);
}

#[test]
fn safe_policy_score_matches_finite_differences() {
    let pol = SafeLogBarrier::new(vec![0.2, 0.1]).unwrap();
    let a = vec![-0.4, 0.5];
    for t in [-0.7, 0.0, 0.6] {
        let h = 1e-5;
        let fd = (pol.log_density(&th(t + h), 0, &a).unwrap() - pol.log_density(&th(t - h), 0, &a).unwrap()) / (2.0 * h);
        let s = pol.score(&th(t), 0, &a).unwrap().grad[0];
        assert!((fd - s).abs() <= 1e-4 * s.abs().max(1e-3), "θ = {t}: {fd} vs {s}");
    }
}

fn gg_score_mean(kappa: f64, theta: f64) -> f64 {
    let gg = GeneralizedGaussian::location(kappa).unwrap();
    let t = th(theta);
    integrate_with_breaks(
        |a| gg.density(&t, 0, a).unwrap() * gg.score(&t, 0, &a).unwrap().grad[0],
        f64::NEG_INFINITY,
        f64::INFINITY,
        &[theta],
        Tolerance::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn softmax_score_identity_and_normalization(seed in any::<u64>(), s in 1usize..4, a in 2usize..5) {
        let pol = SoftmaxPolicy::tabular(s, a);
        let theta = random_theta(seed, s * a, 3.0);
        for st in 0..s {
            let probs = pol.action_probs(&theta, st).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut mean = nalgebra::DVector::zeros(s * a);
            for (ac, p) in probs.iter().enumerate() {
                mean += pol.score(&theta, st, &ac).unwrap().grad * *p;
            }
            prop_assert!(mean.norm() < 1e-12);
        }
    }

    #[test]
    fn softmax_score_matches_finite_differences(seed in any::<u64>(), ac in 0usize..3) {
        let features: Vec<Vec<f64>> = (0..6)
            .map(|i| random_theta(seed.wrapping_add(i), 4, 1.0).as_slice().to_vec())
            .collect();
        let pol = SoftmaxPolicy::linear(2, 3, features).unwrap();
        let theta = random_theta(seed, 4, 1.0);
        let score = pol.score(&theta, 1, &ac).unwrap().grad;
        for i in 0..4 {
            let h = 1e-6;
            let up = pol.log_density(&theta.with_coord(i, theta[i] + h).unwrap(), 1, &ac).unwrap();
            let down = pol.log_density(&theta.with_coord(i, theta[i] - h).unwrap(), 1, &ac).unwrap();
            let fd = (up - down) / (2.0 * h);
            prop_assert!((fd - score[i]).abs() <= 1e-4 * score.norm().max(1e-3));
        }
    }

    #[test]
    fn generalized_gaussian_score_matches_finite_differences(
        kappa in 1.05f64..=2.0,
        theta in -3.0f64..3.0,
        offset in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0],
    ) {
        let gg = GeneralizedGaussian::location(kappa).unwrap();
        let a = theta + offset;
        let s = gg.score(&th(theta), 0, &a).unwrap();
        prop_assert!(!s.at_kink);
        let h = 1e-6 * offset.abs().min(1.0);
        let fd = (gg.log_density(&th(theta + h), 0, &a).unwrap() - gg.log_density(&th(theta - h), 0, &a).unwrap())
            / (2.0 * h);
        prop_assert!((fd - s.grad[0]).abs() <= 1e-4 * s.grad[0].abs());
    }

    #[test]
    fn generalized_gaussian_normalized_and_centered(kappa in 1.05f64..=2.0, theta in -3.0f64..3.0) {
        let gg = GeneralizedGaussian::location(kappa).unwrap();
        let total = gg.region_probability(&th(theta), 0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!(gg_score_mean(kappa, theta).abs() < 1e-6);
    }

    #[test]
    fn safe_policy_normalized_and_centered_1d(c in -0.9f64..0.9, t in -1.0f64..0.5) {
        let pol = SafeLogBarrier::new(vec![c]).unwrap();
        let theta = th(t);
        // a = c ± u^k with k = 1/(1 − θ) flattens |a − c|^{−θ} da to a constant.
        let k = 1.0 / (1.0 - t);
        let side = |sign: f64, reach: f64, f: &dyn Fn(f64) -> f64| {
            integrate(
                |u| {
                    let a = c + sign * u.powf(k);
                    // Offsets below the spacing of floats near c round to c.
                    if a == c { 0.0 } else { k * u.powf(k - 1.0) * f(a) }
                },
                0.0,
                reach.powf(1.0 / k),
                Tolerance {
                    abs: 1e-10,
                    rel: 1e-9,
                    ..Tolerance::default()
                },
            )
            .unwrap()
        };
        let both = |f: &dyn Fn(f64) -> f64| side(1.0, 1.0 - c, f) + side(-1.0, 1.0 + c, f);
        let density = |a: f64| pol.log_density(&theta, 0, &vec![a]).unwrap().exp();
        prop_assert!((both(&density) - 1.0).abs() < 1e-6);
        let weighted = |a: f64| density(a) * pol.score(&theta, 0, &vec![a]).unwrap().grad[0];
        prop_assert!(both(&weighted).abs() < 1e-6);
    }
}
