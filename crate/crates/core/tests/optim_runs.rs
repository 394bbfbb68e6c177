use holderpg::optim::{run, schedule_rate};
use holderpg::oracle::TabularOracle;
use holderpg::{
    Algorithm, ExplorationBandit, GeneralizedGaussian, ParamVector, RateSchedule, RunConfig,
    SoftmaxPolicy, TabularMdp,
};

fn chain_config(algo: Algorithm, iterations: usize, seed: u64) -> RunConfig {
    RunConfig {
        algo,
        iterations,
        batch: 50,
        gamma: 0.9,
        schedule: RateSchedule::Decaying { lambda: 0.5, q: 0.3 },
        xi: (algo == Algorithm::Npg).then_some(0.1),
        seed,
        oracle_tracking: true,
        record_theta: true,
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let oracle = TabularOracle::new(&mdp, &pol);
    for algo in [Algorithm::Pg, Algorithm::Npg] {
        let cfg = chain_config(algo, 40, 5);
        let a = run(&cfg, &mdp, &pol, &ParamVector::zeros(4), Some(&oracle)).unwrap();
        let b = run(&cfg, &mdp, &pol, &ParamVector::zeros(4), Some(&oracle)).unwrap();
        assert_eq!(a, b);
        let c = run(&chain_config(algo, 40, 6), &mdp, &pol, &ParamVector::zeros(4), Some(&oracle)).unwrap();
        assert_ne!(a.log, c.log);
    }
}

#[test]
fn logged_rates_follow_schedule() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let cfg = chain_config(Algorithm::Pg, 25, 1);
    let out = run(&cfg, &mdp, &pol, &ParamVector::zeros(4), Some(&TabularOracle::new(&mdp, &pol))).unwrap();
    assert_eq!(out.log.records.len(), 25);
    for (i, r) in out.log.records.iter().enumerate() {
        assert_eq!(r.t, i + 1);
        assert_eq!(r.h_t, schedule_rate(&cfg.schedule, r.t, 25).unwrap());
        assert!(r.grad_norm_exact.is_some() && r.j_exact.is_some());
    }
    assert_eq!(out.log.records.last().unwrap().theta.as_deref(), Some(out.theta.as_slice()));
}

#[test]
fn tracked_gradient_norm_shrinks() {
    let mdp = TabularMdp::two_state_chain(0.9).unwrap();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let cfg = RunConfig {
        schedule: RateSchedule::Constant { lambda: 1.0 },
        batch: 100,
        ..chain_config(Algorithm::Pg, 1000, 2)
    };
    let out = run(&cfg, &mdp, &pol, &ParamVector::zeros(4), Some(&TabularOracle::new(&mdp, &pol))).unwrap();
    let sq = out.log.exact_sq_grad_norms().unwrap();
    let min_upto = |t: usize| sq[..t].iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min_upto(1000) < min_upto(10));
    let j = |i: usize| out.log.records[i].j_exact.unwrap();
    assert!(j(999) > j(0));
}

#[test]
fn divergence_stops_the_run() {
    // One state, rewards (1000, 0): |gradient| ≈ 250 at θ = 0, so a rate near
    // f64::MAX overflows on the first step.
    let mdp = TabularMdp::from_nested(&[vec![vec![1.0], vec![1.0]]], &[vec![1000.0, 0.0]], 0.5, vec![1.0], 1000.0)
        .unwrap();
    let pol = SoftmaxPolicy::tabular(1, 2);
    let cfg = RunConfig {
        algo: Algorithm::Pg,
        iterations: 50,
        batch: 10,
        gamma: 0.5,
        schedule: RateSchedule::Constant { lambda: 1e308 },
        xi: None,
        seed: 0,
        oracle_tracking: false,
        record_theta: false,
    };
    let out = run(&cfg, &mdp, &pol, &ParamVector::zeros(2), None).unwrap();
    let t = out.diverged_at.expect("θ overflows");
    assert_eq!(out.log.records.len(), t - 1);
    assert!(out.theta.as_slice().iter().all(|x| x.is_finite()));
}

#[test]
fn generalized_gaussian_explores_faster_on_one_seed() {
    let env = ExplorationBandit::new(3.9);
    let cfg = RunConfig {
        algo: Algorithm::Pg,
        iterations: 200,
        batch: 1000,
        gamma: 0.0,
        schedule: RateSchedule::Constant { lambda: 3.0 },
        xi: None,
        seed: 42,
        oracle_tracking: false,
        record_theta: false,
    };
    let first = |kappa: f64| {
        let pol = GeneralizedGaussian::location(kappa).unwrap();
        run(&cfg, &env, &pol, &ParamVector::zeros(1), None)
            .unwrap()
            .log
            .first_reward_above(0.5)
    };
    let gg = first(1.2).expect("κ = 1.2 reaches the target within 200 iterations");
    assert!(first(2.0).is_none_or(|g| g > gg));
}
