use anyhow::Result;
use holderpg::diagnostics::{probe_moments, probe_tail_scan, MomentReport, TailScan};
use holderpg::env::UnitBallEnv;
use holderpg::optim;
use holderpg::rng::seeded;
use holderpg::{
    Algorithm, Environment, ExplorationBandit, GeneralizedGaussian, ParamVector, Policy, RateSchedule, RunConfig,
};
use rayon::prelude::*;

use super::{gaussian_policy, label, safe_policy, softmax_policy, Outcome};
use crate::config::{Env, ExperimentConfig, ExplorationSection, MomentSection, TailScanSection};
use crate::output::{fmt_f64, fmt_opt, OutputDir, Status};

pub fn tail_scan(s: &TailScanSection, seed: u64) -> Result<TailScan> {
    let a = GeneralizedGaussian::location(s.kappas[0])?;
    let b = GeneralizedGaussian::location(s.kappas[1])?;
    let step = (s.grid_max - s.grid_min) / (s.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..s.grid_points).map(|i| s.grid_min + step * i as f64).collect();
    let reference = ParamVector::new(vec![s.reference])?;
    Ok(probe_tail_scan(&a, &b, &reference, &grid, 0, s.n_actions, &mut seeded(seed))?)
}

pub(super) fn write_tail_scan(s: &TailScanSection, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let scan = tail_scan(s, seed)?;
    let header = ["theta1".to_string(), label("kappa", s.kappas[0]), label("kappa", s.kappas[1])];
    let rows: Vec<Vec<String>> = (0..scan.grid.len())
        .map(|i| vec![fmt_f64(scan.grid[i]), fmt_f64(scan.curve_a[i]), fmt_f64(scan.curve_b[i])])
        .collect();
    out.write_csv("tail_scan.csv", &header, &rows)?;
    let last = scan.grid.len() - 1;
    Ok(Outcome::ok(vec![format!(
        "mean score difference at theta1 = {}: {} = {}, {} = {}",
        fmt_f64(scan.grid[last]),
        header[1],
        fmt_f64(scan.curve_a[last]),
        header[2],
        fmt_f64(scan.curve_b[last])
    )]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSeries {
    pub kappa: f64,
    pub seed: u64,
    /// Mean batch reward per iteration.
    pub rewards: Vec<f64>,
    /// First iteration whose mean batch reward exceeds the threshold.
    pub first_above: Option<usize>,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationResult {
    /// Ordered by kappa (config order), then seed.
    pub series: Vec<ExplorationSeries>,
    /// `(κ, π_κ(a ∈ [θ* − w, θ* + w]))` at the initial parameter.
    pub region_probability: Vec<(f64, f64)>,
}

impl ExplorationResult {
    pub fn for_kappa(&self, kappa: f64) -> impl Iterator<Item = &ExplorationSeries> {
        self.series.iter().filter(move |s| s.kappa == kappa)
    }
}

/// PG on the exploration bandit for every (κ, seed) pair; seed `i` uses
/// `base_seed + i`.
pub fn exploration(s: &ExplorationSection, base_seed: u64) -> Result<ExplorationResult> {
    let env = ExplorationBandit::new(s.theta_star);
    let theta0 = ParamVector::new(vec![s.theta0])?;
    let jobs: Vec<(f64, u64)> = s
        .kappas
        .iter()
        .flat_map(|k| (0..s.seeds as u64).map(move |i| (*k, base_seed.wrapping_add(i))))
        .collect();
    let series = jobs
        .into_par_iter()
        .map(|(kappa, seed)| -> Result<ExplorationSeries> {
            let cfg = RunConfig {
                algo: Algorithm::Pg,
                iterations: s.iterations,
                batch: s.batch,
                gamma: 0.0,
                schedule: RateSchedule::Constant { lambda: s.lambda },
                xi: None,
                seed,
                oracle_tracking: false,
                record_theta: false,
            };
            let pol = GeneralizedGaussian::location(kappa)?;
            let res = optim::run(&cfg, &env, &pol, &theta0, None)?;
            Ok(ExplorationSeries {
                kappa,
                seed,
                first_above: res.log.first_reward_above(s.reward_threshold),
                rewards: res.log.records.iter().map(|r| r.reward_mean).collect(),
                diverged_at: res.diverged_at,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let region_probability = s
        .kappas
        .iter()
        .map(|k| {
            let p = GeneralizedGaussian::location(*k)?.region_probability(
                &theta0,
                0,
                s.theta_star - s.region_half_width,
                s.theta_star + s.region_half_width,
            )?;
            Ok((*k, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExplorationResult {
        series,
        region_probability,
    })
}

pub(super) fn write_exploration(s: &ExplorationSection, seed: u64, out: &mut OutputDir) -> Result<Outcome> {
    let res = exploration(s, seed)?;
    for kappa in &s.kappas {
        let series: Vec<&ExplorationSeries> = res.for_kappa(*kappa).collect();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain(series.iter().map(|x| format!("seed_{}", x.seed)))
            .collect();
        let rows: Vec<Vec<String>> = (0..s.iterations)
            .map(|t| {
                std::iter::once((t + 1).to_string())
                    .chain(series.iter().map(|x| fmt_opt(x.rewards.get(t).copied())))
                    .collect()
            })
            .collect();
        out.write_csv(&format!("exploration_{}.csv", label("kappa", *kappa)), &header, &rows)?;
    }
    let rows: Vec<Vec<String>> = res
        .series
        .iter()
        .map(|x| {
            vec![
                fmt_f64(x.kappa),
                x.seed.to_string(),
                x.first_above.map(|t| t.to_string()).unwrap_or_default(),
                x.diverged_at.map(|t| t.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv("exploration_summary.csv", &["kappa", "seed", "first_iteration_above", "diverged_at"], &rows)?;
    let rows: Vec<Vec<String>> = res
        .region_probability
        .iter()
        .map(|(k, p)| vec![fmt_f64(*k), fmt_f64(*p)])
        .collect();
    out.write_csv("exploration_region.csv", &["kappa", "region_probability"], &rows)?;

    let mut summary = Vec::new();
    for (k, p) in &res.region_probability {
        let hits: Vec<String> = res
            .for_kappa(*k)
            .map(|x| x.first_above.map_or("never".to_string(), |t| t.to_string()))
            .collect();
        summary.push(format!(
            "kappa {}: region probability {}, first iteration above {}: [{}]",
            fmt_f64(*k),
            fmt_f64(*p),
            fmt_f64(s.reward_threshold),
            hits.join(", ")
        ));
    }
    let notes: Vec<String> = res
        .series
        .iter()
        .filter_map(|x| {
            x.diverged_at
                .map(|t| format!("kappa {} seed {} diverged at iteration {t}", fmt_f64(x.kappa), x.seed))
        })
        .collect();
    summary.extend(notes.iter().cloned());
    Ok(Outcome {
        status: if notes.is_empty() { Status::Ok } else { Status::Diverged },
        summary,
        notes,
    })
}

/// `1, 2, 5, 10, 20, 50, …` below `n_max`, then `n_max`.
pub fn default_checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let c = m * decade;
            if c >= n_max {
                break 'outer;
            }
            out.push(c);
        }
        decade *= 10;
    }
    out.push(n_max);
    out
}

pub(super) fn moment_probe(config: &ExperimentConfig, s: &MomentSection, out: &mut OutputDir) -> Result<Outcome> {
    let theta = config.theta_or_zero(&s.theta);
    let checkpoints = s.checkpoints.clone().unwrap_or_else(|| default_checkpoints(s.n_max));
    let policy = config.policy.as_ref().expect("validated");
    let mut rng = seeded(config.seed);
    let report = match config.env.as_ref().expect("validated") {
        Env::Tabular(mdp) => {
            let gamma = s.gamma.unwrap_or(mdp.gamma());
            probe(mdp, &softmax_policy(policy, mdp)?, &theta, gamma, s.n_max, &checkpoints, &mut rng)?
        }
        Env::Exploration { theta_star } => {
            let env = ExplorationBandit::new(*theta_star);
            probe(&env, &gaussian_policy(policy)?, &theta, s.gamma.unwrap_or(0.0), s.n_max, &checkpoints, &mut rng)?
        }
        Env::UnitBall { dim } => {
            let env = UnitBallEnv { dim: *dim };
            probe(&env, &safe_policy(policy)?, &theta, s.gamma.unwrap_or(0.0), s.n_max, &checkpoints, &mut rng)?
        }
    };
    let rows: Vec<Vec<String>> = (0..report.sample_counts.len())
        .map(|i| {
            vec![
                report.sample_counts[i].to_string(),
                fmt_f64(report.running_l2[i]),
                fmt_f64(report.l2_std_error[i]),
                fmt_f64(report.running_max[i]),
            ]
        })
        .collect();
    out.write_csv("moments.csv", &["n", "running_l2", "l2_std_error", "running_max"], &rows)?;
    let last = report.sample_counts.len() - 1;
    Ok(Outcome::ok(vec![format!(
        "N = {}: running L2 = {} (SE {}), running max = {}",
        report.sample_counts[last],
        fmt_f64(report.running_l2[last]),
        fmt_f64(report.l2_std_error[last]),
        fmt_f64(report.running_max[last])
    )]))
}

fn probe<E, P>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    n_max: usize,
    checkpoints: &[usize],
    rng: &mut holderpg::rng::SimRng,
) -> Result<MomentReport>
where
    E: Environment,
    P: Policy<Action = E::Action>,
{
    Ok(probe_moments(env, policy, theta, gamma, n_max, checkpoints, rng)?)
}
