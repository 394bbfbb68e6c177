use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use holderpg::estimators::{estimate_fisher, estimate_gradient};
use holderpg::rng::seeded;
use holderpg::{ExplorationBandit, GeneralizedGaussian, OracleReport, ParamVector, SafeLogBarrier, SoftmaxPolicy, TabularMdp};
use std::hint::black_box;

fn chain() -> TabularMdp {
    TabularMdp::new(
        2,
        2,
        vec![0.9, 0.1, 0.1, 0.9, 0.5, 0.5, 0.5, 0.5],
        vec![1.0, 0.0, 0.0, 1.0],
        0.9,
        vec![0.5, 0.5],
        1.0,
    )
    .unwrap()
}

fn estimators(c: &mut Criterion) {
    let mdp = chain();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = ParamVector::new(vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    let mut rng = seeded(1);
    c.bench_function("estimate_gradient/chain/B=1000", |b| {
        b.iter(|| estimate_gradient(&mdp, &pol, &theta, 0.9, 1000, &mut rng).unwrap())
    });
    c.bench_function("estimate_fisher/chain/B=1000", |b| {
        b.iter(|| estimate_fisher(&mdp, &pol, &theta, 0.9, 1000, 0.1, &mut rng).unwrap())
    });

    let bandit = ExplorationBandit::new(3.9);
    let gg = GeneralizedGaussian::location(1.2).unwrap();
    let t0 = ParamVector::new(vec![0.0]).unwrap();
    c.bench_function("estimate_gradient/bandit/kappa=1.2/B=1000", |b| {
        b.iter(|| estimate_gradient(&bandit, &gg, &t0, 0.0, 1000, &mut rng).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let mdp = chain();
    let pol = SoftmaxPolicy::tabular(2, 2);
    let theta = ParamVector::new(vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    c.bench_function("oracle_report/chain", |b| {
        b.iter(|| OracleReport::compute(&mdp, &pol, black_box(&theta), None).unwrap())
    });
}

fn quadrature(c: &mut Criterion) {
    let gg = GeneralizedGaussian::location(1.2).unwrap();
    let t0 = ParamVector::new(vec![0.5]).unwrap();
    c.bench_function("region_probability/kappa=1.2", |b| {
        b.iter(|| gg.region_probability(black_box(&t0), 0, 2.9, 4.9).unwrap())
    });
    let theta = ParamVector::new(vec![0.5]).unwrap();
    c.bench_function("safe_moments/2d/uncached", |b| {
        b.iter_batched(
            || SafeLogBarrier::new(vec![0.2, -0.1]).unwrap(),
            |p| p.moments(&theta).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, estimators, oracle, quadrature);
criterion_main!(benches);
