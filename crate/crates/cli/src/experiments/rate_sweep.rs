use anyhow::Result;
use holderpg::diagnostics::{fit_rate, running_average};
use holderpg::optim;
use holderpg::oracle::TabularOracle;
use holderpg::stats::LinearFit;
use holderpg::{Algorithm, RateSchedule, RunConfig, SoftmaxPolicy, TabularMdp};
use rayon::prelude::*;

use super::{label, softmax_policy, Outcome};
use crate::config::{ExperimentConfig, RateSweepSection};
use crate::output::{fmt_f64, fmt_opt, OutputDir, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub algo: Algorithm,
    pub lambda: f64,
    /// Exact `‖∇J(θ_{t−1})‖` per iteration.
    pub grad_norms: Vec<f64>,
    /// `(1/T') Σ_{t≤T'} ‖∇J‖²`.
    pub running_avg: Vec<f64>,
    pub fit: Option<LinearFit>,
    pub first_below: Option<usize>,
    pub diverged_at: Option<usize>,
}

impl RateSeries {
    pub fn name(&self) -> String {
        let algo = match self.algo {
            Algorithm::Pg => "pg",
            Algorithm::Npg => "npg",
        };
        label(&format!("{algo}_lambda"), self.lambda)
    }
}

/// Constant-rate runs with exact tracking for every (algorithm, λ) pair, all
/// from the same seed and initial parameter.
pub fn rate_sweep(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    s: &RateSweepSection,
    theta0: &holderpg::ParamVector,
    seed: u64,
) -> Result<Vec<RateSeries>> {
    let mdp = match s.gamma {
        Some(g) => mdp.with_gamma(g)?,
        None => mdp.clone(),
    };
    let window = s.window_start..=s.window_end.unwrap_or(s.iterations);
    let jobs: Vec<(Algorithm, f64)> = s.algos.iter().flat_map(|a| s.lambdas.iter().map(move |l| (*a, *l))).collect();
    jobs.into_par_iter()
        .map(|(algo, lambda)| {
            let cfg = RunConfig {
                algo,
                iterations: s.iterations,
                batch: s.batch,
                gamma: mdp.gamma(),
                schedule: RateSchedule::Constant { lambda },
                xi: (algo == Algorithm::Npg).then_some(s.xi),
                seed,
                oracle_tracking: true,
                record_theta: false,
            };
            let oracle = TabularOracle::new(&mdp, policy);
            let res = optim::run(&cfg, &mdp, policy, theta0, Some(&oracle))?;
            let grad_norms: Vec<f64> = res.log.records.iter().map(|r| r.grad_norm_exact.expect("tracked")).collect();
            let sq: Vec<f64> = grad_norms.iter().map(|g| g * g).collect();
            Ok(RateSeries {
                algo,
                lambda,
                running_avg: running_average(&sq),
                fit: fit_rate(&res.log, window.clone()).ok(),
                first_below: s.grad_threshold.and_then(|th| res.log.first_grad_norm_below(th)),
                diverged_at: res.diverged_at,
                grad_norms,
            })
        })
        .collect()
}

pub(super) fn write_rate_sweep(config: &ExperimentConfig, s: &RateSweepSection, out: &mut OutputDir) -> Result<Outcome> {
    let mdp = config.mdp().expect("validated");
    let policy = softmax_policy(config.policy.as_ref().expect("validated"), mdp)?;
    let theta0 = config.theta_or_zero(&s.theta0);
    let series = rate_sweep(mdp, &policy, s, &theta0, config.seed)?;

    let header: Vec<String> = std::iter::once("t".to_string()).chain(series.iter().map(RateSeries::name)).collect();
    let column = |f: &dyn Fn(&RateSeries) -> &Vec<f64>| -> Vec<Vec<String>> {
        (0..s.iterations)
            .map(|t| {
                std::iter::once((t + 1).to_string())
                    .chain(series.iter().map(|x| fmt_opt(f(x).get(t).copied())))
                    .collect()
            })
            .collect()
    };
    out.write_csv("rate_sweep_running_avg.csv", &header, &column(&|x| &x.running_avg))?;
    out.write_csv("rate_sweep_grad_norm.csv", &header, &column(&|x| &x.grad_norms))?;
    let rows: Vec<Vec<String>> = series
        .iter()
        .map(|x| {
            vec![
                x.name(),
                fmt_opt(x.fit.map(|f| f.slope)),
                fmt_opt(x.fit.map(|f| f.slope_std_error)),
                fmt_opt(x.fit.map(|f| f.r2)),
                x.first_below.map(|t| t.to_string()).unwrap_or_default(),
                x.diverged_at.map(|t| t.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv(
        "rate_sweep_fit.csv",
        &["series", "slope", "slope_std_error", "r2", "first_below_threshold", "diverged_at"],
        &rows,
    )?;

    let mut summary: Vec<String> = series
        .iter()
        .map(|x| {
            format!(
                "{}: slope {} (SE {}), first iteration below threshold: {}",
                x.name(),
                fmt_opt(x.fit.map(|f| f.slope)),
                fmt_opt(x.fit.map(|f| f.slope_std_error)),
                x.first_below.map_or("-".to_string(), |t| t.to_string())
            )
        })
        .collect();
    let notes: Vec<String> = series
        .iter()
        .filter_map(|x| x.diverged_at.map(|t| format!("{} diverged at iteration {t}", x.name())))
        .collect();
    summary.extend(notes.iter().cloned());
    if let Some(th) = s.grad_threshold {
        summary.push(format!("threshold on exact gradient norm: {}", fmt_f64(th)));
    }
    Ok(Outcome {
        status: if notes.is_empty() { Status::Ok } else { Status::Diverged },
        summary,
        notes,
    })
}
