use anyhow::{bail, Result};
use holderpg::env::UnitBallEnv;
use holderpg::optim::{self, OracleTracker};
use holderpg::oracle::TabularOracle;
use holderpg::{Environment, ExplorationBandit, ParamVector, Policy, RunConfig, RunOutcome};

use super::{gaussian_policy, safe_policy, softmax_policy, Outcome};
use crate::config::{Env, ExperimentConfig, Section};
use crate::output::{fmt_f64, fmt_opt, OutputDir, Status};

pub const RUN_LOG_HEADER: [&str; 6] = ["t", "h_t", "grad_norm_est", "grad_norm_exact", "J_exact", "reward_mean"];

pub fn run(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let Section::Run(section) = &config.section else { unreachable!() };
    let mut rc = config.run_config().expect("run section");
    let theta0 = config.theta_or_zero(&section.theta0);
    let policy = config.policy.as_ref().expect("validated");
    let result = match config.env.as_ref().expect("validated") {
        Env::Tabular(mdp) => {
            let mdp = mdp.with_gamma(rc.gamma)?;
            let pol = softmax_policy(policy, &mdp)?;
            let oracle = TabularOracle::new(&mdp, &pol);
            drive(&rc, &mdp, &pol, &theta0, Some(&oracle))?
        }
        Env::Exploration { theta_star } => {
            rc.oracle_tracking = false;
            drive(&rc, &ExplorationBandit::new(*theta_star), &gaussian_policy(policy)?, &theta0, None)?
        }
        Env::UnitBall { dim } => {
            rc.oracle_tracking = false;
            drive(&rc, &UnitBallEnv { dim: *dim }, &safe_policy(policy)?, &theta0, None)?
        }
    };
    write_run_log(out, "run_log.csv", &result)?;
    if rc.record_theta {
        let n = result.theta.dim();
        let header: Vec<String> = std::iter::once("t".to_string()).chain((0..n).map(|i| format!("theta_{i}"))).collect();
        let rows: Vec<Vec<String>> = result
            .log
            .records
            .iter()
            .map(|r| {
                std::iter::once(r.t.to_string())
                    .chain(r.theta.iter().flatten().map(|x| fmt_f64(*x)))
                    .collect()
            })
            .collect();
        out.write_csv("theta.csv", &header, &rows)?;
    }

    let mut summary = vec![format!("iterations completed: {}", result.log.records.len())];
    summary.push(format!("final theta: {:?}", result.theta.as_slice()));
    if let Some(j) = result.log.records.last().and_then(|r| r.j_exact) {
        summary.push(format!("J at last tracked iterate: {}", fmt_f64(j)));
    }
    Ok(match result.diverged_at {
        None => Outcome::ok(summary),
        Some(t) => {
            let note = format!("diverged at iteration {t}: non-finite parameter; run_log.csv holds the {} completed iterations", t - 1);
            summary.push(note.clone());
            Outcome {
                status: Status::Diverged,
                summary,
                notes: vec![note],
            }
        }
    })
}

fn drive<E, P>(
    rc: &RunConfig,
    env: &E,
    policy: &P,
    theta0: &ParamVector,
    tracker: Option<&dyn OracleTracker>,
) -> Result<RunOutcome>
where
    E: Environment,
    P: Policy<Action = E::Action>,
{
    if rc.oracle_tracking && tracker.is_none() {
        bail!("run.oracle_tracking needs a tabular env");
    }
    Ok(optim::run(rc, env, policy, theta0, tracker)?)
}

pub fn write_run_log(out: &mut OutputDir, name: &str, result: &RunOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = result
        .log
        .records
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                fmt_f64(r.h_t),
                fmt_f64(r.grad_norm_est),
                fmt_opt(r.grad_norm_exact),
                fmt_opt(r.j_exact),
                fmt_f64(r.reward_mean),
            ]
        })
        .collect();
    out.write_csv(name, &RUN_LOG_HEADER, &rows)
}
