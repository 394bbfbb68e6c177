//! Experiment drivers. Each one computes its result, writes CSVs through
//! [`OutputDir`] and reports a status plus human-readable summary lines.

mod scans;
mod oracle_check;
mod probes;
mod rate_sweep;
mod run;

use anyhow::{bail, Result};
use holderpg::{GeneralizedGaussian, PolicySpec, SafeLogBarrier, SoftmaxPolicy, TabularMdp};

use crate::config::{ExperimentConfig, Section};
use crate::output::{OutputDir, Status};

pub use scans::{exploration, tail_scan, ExplorationResult, ExplorationSeries};
pub use oracle_check::{oracle_checks, CheckRow};
pub use rate_sweep::{rate_sweep, RateSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub summary: Vec<String>,
    /// Flags recorded in the manifest (divergence, failed checks).
    pub notes: Vec<String>,
}

impl Outcome {
    fn ok(summary: Vec<String>) -> Self {
        Self {
            status: Status::Ok,
            summary,
            notes: Vec::new(),
        }
    }
}

/// Runs the configured experiment and writes its CSVs and manifest into
/// `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    let mut out = OutputDir::create(&config.output_dir)?;
    let outcome = match &config.section {
        Section::Run(_) => run::run(config, &mut out)?,
        Section::TailScan(s) => scans::write_tail_scan(s, config.seed, &mut out)?,
        Section::Exploration(s) => scans::write_exploration(s, config.seed, &mut out)?,
        Section::MomentProbe(s) => scans::moment_probe(config, s, &mut out)?,
        Section::SmoothnessProbe(s) => probes::smoothness_probe(config, s, &mut out)?,
        Section::ErgodicityProbe(s) => probes::ergodicity_probe(config, s, &mut out)?,
        Section::NoiseProbe(s) => probes::noise_probe(config, s, &mut out)?,
        Section::OracleCheck(s) => oracle_check::write_oracle_check(config, s, &mut out)?,
        Section::RateSweep(s) => rate_sweep::write_rate_sweep(config, s, &mut out)?,
    };
    out.finish(
        config.experiment.name(),
        config.seed,
        outcome.status.clone(),
        &outcome.notes,
        &config.echo,
    )?;
    Ok(outcome)
}

pub(crate) fn softmax_policy(spec: &PolicySpec, mdp: &TabularMdp) -> Result<SoftmaxPolicy> {
    match spec {
        PolicySpec::TabularSoftmax { features: None } => Ok(SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions())),
        PolicySpec::TabularSoftmax { features: Some(f) } => {
            Ok(SoftmaxPolicy::linear(mdp.n_states(), mdp.n_actions(), f.clone())?)
        }
        _ => bail!("policy.kind must be tabular_softmax"),
    }
}

pub(crate) fn gaussian_policy(spec: &PolicySpec) -> Result<GeneralizedGaussian> {
    match spec {
        PolicySpec::GeneralizedGaussian {
            kappa,
            state_features: None,
        } => Ok(GeneralizedGaussian::location(*kappa)?),
        PolicySpec::GeneralizedGaussian {
            kappa,
            state_features: Some(f),
        } => Ok(GeneralizedGaussian::with_features(*kappa, f.clone())?),
        _ => bail!("policy.kind must be generalized_gaussian"),
    }
}

pub(crate) fn safe_policy(spec: &PolicySpec) -> Result<SafeLogBarrier> {
    match spec {
        PolicySpec::SafeLogBarrier { phi_star } => Ok(SafeLogBarrier::new(phi_star.clone())?),
        _ => bail!("policy.kind must be safe_log_barrier"),
    }
}

/// Column label for a real parameter value, e.g. `kappa_1.2`.
pub(crate) fn label(prefix: &str, x: f64) -> String {
    format!("{prefix}_{x:?}")
}
