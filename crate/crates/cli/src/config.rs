//! Experiment configuration: a TOML document with one top-level table per
//! concern. Unknown keys are rejected and every validation problem is reported
//! at once, each message naming the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use holderpg::{Algorithm, ParamVector, PolicySpec, RateSchedule, RunConfig, TabularMdp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const BUNDLED_CHAIN: &str = include_str!("../data/two_state_chain.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Run,
    TailScan,
    Exploration,
    MomentProbe,
    SmoothnessProbe,
    ErgodicityProbe,
    NoiseProbe,
    OracleCheck,
    RateSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::TailScan => "tail_scan",
            Experiment::Exploration => "exploration",
            Experiment::MomentProbe => "moment_probe",
            Experiment::SmoothnessProbe => "smoothness_probe",
            Experiment::ErgodicityProbe => "ergodicity_probe",
            Experiment::NoiseProbe => "noise_probe",
            Experiment::OracleCheck => "oracle_check",
            Experiment::RateSweep => "rate_sweep",
        }
    }

    fn own_section(self) -> Option<&'static str> {
        match self {
            Experiment::Run => None,
            other => Some(other.name()),
        }
    }

    fn needs_env(self) -> bool {
        !matches!(self, Experiment::TailScan | Experiment::Exploration)
    }

    fn needs_policy(self) -> bool {
        !matches!(self, Experiment::TailScan | Experiment::Exploration)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Environment section. `bundled_chain` is the two-state, two-action chain
/// shipped with the binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    BundledChain {
        #[serde(default)]
        gamma: Option<f64>,
    },
    Tabular {
        path: PathBuf,
        #[serde(default)]
        gamma: Option<f64>,
    },
    Exploration { theta_star: f64 },
    UnitBall { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algo: Algorithm,
    pub iterations: usize,
    pub batch: usize,
    pub gamma: f64,
    pub schedule: RateSchedule,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub oracle_tracking: bool,
    #[serde(default)]
    pub record_theta: bool,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSection {
    #[serde(default = "defaults::theta_star")]
    pub theta_star: f64,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "defaults::exploration_batch")]
    pub batch: usize,
    pub iterations: usize,
    pub lambda: f64,
    #[serde(default = "defaults::kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "defaults::seeds")]
    pub seeds: usize,
    #[serde(default = "defaults::reward_threshold")]
    pub reward_threshold: f64,
    /// Half-width of the region around `θ*` whose probability is reported.
    #[serde(default = "defaults::one")]
    pub region_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailScanSection {
    #[serde(default = "defaults::kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "defaults::grid_min")]
    pub grid_min: f64,
    #[serde(default = "defaults::grid_max")]
    pub grid_max: f64,
    #[serde(default = "defaults::grid_points")]
    pub grid_points: usize,
    #[serde(default = "defaults::tail_actions")]
    pub n_actions: usize,
    #[serde(default)]
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub n_max: usize,
    /// Defaults to 1, 2, 5, 10, 20, 50, … up to `n_max`.
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessSection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Defaults to 9 radii log-spaced over [1e-3, 1e-1].
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default = "defaults::directions")]
    pub n_directions: usize,
    /// Score evaluation points per side of the kink (continuous actions).
    #[serde(default = "defaults::kink_points")]
    pub kink_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicitySection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    pub n_max: usize,
    /// Sampled trajectories; exact matrix powers when absent.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default = "defaults::tv_floor")]
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default = "defaults::noise_batches")]
    pub batches: Vec<usize>,
    #[serde(default = "defaults::noise_repeats")]
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckSection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Random θ pairs for the pairwise identities.
    #[serde(default = "defaults::oracle_pairs")]
    pub random_pairs: usize,
    #[serde(default = "defaults::theta_scale")]
    pub theta_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSweepSection {
    #[serde(default = "defaults::algos")]
    pub algos: Vec<Algorithm>,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub batch: usize,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "defaults::xi")]
    pub xi: f64,
    #[serde(default = "defaults::window_start")]
    pub window_start: usize,
    #[serde(default)]
    pub window_end: Option<usize>,
    /// Exact gradient-norm level used to compare iteration counts.
    #[serde(default)]
    pub grad_threshold: Option<f64>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

mod defaults {
    use holderpg::Algorithm;

    pub fn theta_star() -> f64 {
        3.9
    }
    pub fn exploration_batch() -> usize {
        1000
    }
    pub fn kappas() -> Vec<f64> {
        vec![1.2, 2.0]
    }
    pub fn seeds() -> usize {
        5
    }
    pub fn reward_threshold() -> f64 {
        0.5
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn grid_min() -> f64 {
        -2.0
    }
    pub fn grid_max() -> f64 {
        2.0
    }
    pub fn grid_points() -> usize {
        41
    }
    pub fn tail_actions() -> usize {
        4000
    }
    pub fn directions() -> usize {
        8
    }
    pub fn kink_points() -> usize {
        60
    }
    pub fn tv_floor() -> f64 {
        1e-3
    }
    pub fn noise_batches() -> Vec<usize> {
        vec![10, 100, 1000]
    }
    pub fn noise_repeats() -> usize {
        500
    }
    pub fn oracle_pairs() -> usize {
        20
    }
    pub fn theta_scale() -> f64 {
        1.0
    }
    pub fn algos() -> Vec<Algorithm> {
        vec![Algorithm::Pg, Algorithm::Npg]
    }
    pub fn xi() -> f64 {
        0.1
    }
    pub fn window_start() -> usize {
        10
    }
}

/// Experiment-specific section.
#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Run(RunSection),
    TailScan(TailScanSection),
    Exploration(ExplorationSection),
    MomentProbe(MomentSection),
    SmoothnessProbe(SmoothnessSection),
    ErgodicityProbe(ErgodicitySection),
    NoiseProbe(NoiseSection),
    OracleCheck(OracleCheckSection),
    RateSweep(RateSweepSection),
}

/// Resolved environment: tabular MDPs are loaded at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Tabular(TabularMdp),
    Exploration { theta_star: f64 },
    UnitBall { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub env: Option<Env>,
    pub policy: Option<PolicySpec>,
    pub section: Section,
    /// The parsed document with command-line overrides applied, echoed into
    /// the manifest.
    pub echo: toml::Table,
}

/// Values supplied on the command line, taking precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub fn parse_config(path: &Path, experiment: Experiment, overrides: &Overrides) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("config: cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, experiment, overrides)
}

/// Parses a configuration document; relative file paths resolve against `base`.
pub fn parse_config_str(
    text: &str,
    base: &Path,
    experiment: Experiment,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigErrors> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("config: {}", e.message())]))?;
    let mut errs = Vec::new();

    if let Some(seed) = overrides.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(dir) = &overrides.output_dir {
        table.insert("output_dir".into(), toml::Value::String(dir.display().to_string()));
    }
    match table.get("experiment") {
        None => {
            table.insert("experiment".into(), toml::Value::String(experiment.name().into()));
        }
        Some(v) => match v.clone().try_into::<Experiment>() {
            Ok(e) if e == experiment => {}
            Ok(e) => errs.push(format!("experiment: config is for `{e}` but the subcommand is `{experiment}`")),
            Err(e) => errs.push(format!("experiment: {}", e.message())),
        },
    }
    let echo = table.clone();

    let own = experiment.own_section();
    let run_section = (experiment == Experiment::Run).then_some("run");
    for key in table.keys() {
        let known = matches!(key.as_str(), "experiment" | "seed" | "output_dir")
            || (key == "env" && experiment.needs_env())
            || (key == "policy" && experiment.needs_policy())
            || Some(key.as_str()) == own
            || Some(key.as_str()) == run_section;
        if !known {
            errs.push(format!("{key}: unknown key for experiment `{experiment}`"));
        }
    }

    let seed = match table.get("seed") {
        None => {
            errs.push("seed: missing (pass --seed or set seed in the config)".into());
            0
        }
        Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(v) => {
            errs.push(format!("seed: must be a non-negative integer, got {v}"));
            0
        }
    };
    let output_dir = match table.get("output_dir") {
        None => {
            errs.push("output_dir: missing (pass --output or set output_dir in the config)".into());
            PathBuf::new()
        }
        Some(toml::Value::String(s)) if !s.is_empty() => resolve(base, Path::new(s)),
        Some(v) => {
            errs.push(format!("output_dir: must be a non-empty path string, got {v}"));
            PathBuf::new()
        }
    };

    let env = if experiment.needs_env() {
        section::<EnvSpec>(&table, "env", &mut errs).and_then(|spec| load_env(spec, base, &mut errs))
    } else {
        None
    };
    let policy = if experiment.needs_policy() {
        section::<PolicySpec>(&table, "policy", &mut errs).inspect(|p| {
            if let Err(e) = p.validate() {
                errs.push(format!("policy: {e}"));
            }
        })
    } else {
        None
    };

    let name = own.unwrap_or("run");
    let parsed = match experiment {
        Experiment::Run => section(&table, name, &mut errs).map(Section::Run),
        Experiment::TailScan => section(&table, name, &mut errs).map(Section::TailScan),
        Experiment::Exploration => section(&table, name, &mut errs).map(Section::Exploration),
        Experiment::MomentProbe => section(&table, name, &mut errs).map(Section::MomentProbe),
        Experiment::SmoothnessProbe => section(&table, name, &mut errs).map(Section::SmoothnessProbe),
        Experiment::ErgodicityProbe => section(&table, name, &mut errs).map(Section::ErgodicityProbe),
        Experiment::NoiseProbe => section(&table, name, &mut errs).map(Section::NoiseProbe),
        Experiment::OracleCheck => section(&table, name, &mut errs).map(Section::OracleCheck),
        Experiment::RateSweep => section(&table, name, &mut errs).map(Section::RateSweep),
    };

    let cfg = parsed.map(|section| ExperimentConfig {
        experiment,
        seed,
        output_dir,
        env,
        policy,
        section,
        echo,
    });
    if let Some(cfg) = &cfg {
        validate(cfg, &mut errs);
    }
    match cfg {
        Some(cfg) if errs.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(errs)),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn section<T: DeserializeOwned>(table: &toml::Table, key: &str, errs: &mut Vec<String>) -> Option<T> {
    match table.get(key) {
        None => {
            errs.push(format!("{key}: missing section [{key}]"));
            None
        }
        Some(v) => v
            .clone()
            .try_into::<T>()
            .map_err(|e| errs.push(format!("{key}: {}", e.message().trim())))
            .ok(),
    }
}

fn load_env(spec: EnvSpec, base: &Path, errs: &mut Vec<String>) -> Option<Env> {
    let (text, gamma, key) = match spec {
        EnvSpec::BundledChain { gamma } => (BUNDLED_CHAIN.to_string(), gamma, "env"),
        EnvSpec::Tabular { path, gamma } => {
            let full = resolve(base, &path);
            match std::fs::read_to_string(&full) {
                Ok(t) => (t, gamma, "env.path"),
                Err(e) => {
                    errs.push(format!("env.path: cannot read {}: {e}", full.display()));
                    return None;
                }
            }
        }
        EnvSpec::Exploration { theta_star } => {
            if !theta_star.is_finite() {
                errs.push(format!("env.theta_star must be finite, got {theta_star}"));
            }
            return Some(Env::Exploration { theta_star });
        }
        EnvSpec::UnitBall { dim } => {
            if dim == 0 {
                errs.push("env.dim must be at least 1".into());
            }
            return Some(Env::UnitBall { dim });
        }
    };
    let mdp = TabularMdp::from_toml_str(&text).map_err(|e| errs.push(format!("{key}: {e}"))).ok()?;
    match gamma {
        None => Some(Env::Tabular(mdp)),
        Some(g) => match mdp.with_gamma(g) {
            Ok(m) => Some(Env::Tabular(m)),
            Err(_) => {
                errs.push(format!("env.gamma must lie in [0,1), got {g}"));
                None
            }
        },
    }
}

fn check_gamma(key: &str, g: f64, errs: &mut Vec<String>) {
    if !(0.0..1.0).contains(&g) {
        errs.push(format!("{key} must lie in [0,1), got {g}"));
    }
}

fn check_xi(key: &str, xi: f64, errs: &mut Vec<String>) {
    if !(xi > 0.0 && xi <= 1.0) {
        errs.push(format!("{key} must lie in (0,1], got {xi}"));
    }
}

fn check_positive(key: &str, x: usize, errs: &mut Vec<String>) {
    if x == 0 {
        errs.push(format!("{key} must be at least 1"));
    }
}

fn check_kappa(key: &str, k: f64, errs: &mut Vec<String>) {
    if !(k > 1.0 && k <= 2.0) {
        errs.push(format!("{key} must lie in (1,2], got {k}"));
    }
}

fn check_finite(key: &str, x: f64, errs: &mut Vec<String>) {
    if !x.is_finite() {
        errs.push(format!("{key} must be finite, got {x}"));
    }
}

fn check_theta(key: &str, theta: &Option<Vec<f64>>, dim: Option<usize>, errs: &mut Vec<String>) {
    let Some(t) = theta else { return };
    if t.iter().any(|x| !x.is_finite()) {
        errs.push(format!("{key} must have finite entries"));
    }
    if let Some(d) = dim {
        if t.len() != d {
            errs.push(format!("{key} has length {}, the policy has dimension {d}", t.len()));
        }
    }
}

fn check_schedule(schedule: &RateSchedule, errs: &mut Vec<String>) {
    let lambda = schedule.lambda();
    if !(lambda > 0.0 && lambda.is_finite()) {
        errs.push(format!("run.schedule.lambda must lie in (0,∞), got {lambda}"));
    }
    match *schedule {
        RateSchedule::HorizonScaled { beta0, .. } if !(beta0 > 0.0 && beta0 <= 1.0) => {
            errs.push(format!("run.schedule.beta0 must lie in (0,1], got {beta0}"))
        }
        RateSchedule::Decaying { q, .. } if !(0.0..1.0).contains(&q) => {
            errs.push(format!("run.schedule.q must lie in [0,1), got {q}"))
        }
        _ => {}
    }
}

/// Number of parameters of a policy, given the number of states it acts on.
pub fn policy_dim(spec: &PolicySpec, n_states: usize, n_actions: usize) -> usize {
    match spec {
        PolicySpec::TabularSoftmax { features: None } => n_states * n_actions,
        PolicySpec::TabularSoftmax { features: Some(f) } => f.first().map_or(0, Vec::len),
        PolicySpec::GeneralizedGaussian { state_features: None, .. } => 1,
        PolicySpec::GeneralizedGaussian { state_features: Some(f), .. } => f.first().map_or(0, Vec::len),
        PolicySpec::SafeLogBarrier { .. } => 1,
    }
}

impl ExperimentConfig {
    /// Parameter dimension for the configured (env, policy) pair.
    pub fn theta_dim(&self) -> Option<usize> {
        let policy = self.policy.as_ref()?;
        let (s, a) = match &self.env {
            Some(Env::Tabular(m)) => (m.n_states(), m.n_actions()),
            _ => (1, 1),
        };
        Some(policy_dim(policy, s, a))
    }

    /// `theta` if given, the zero vector otherwise.
    pub fn theta_or_zero(&self, theta: &Option<Vec<f64>>) -> ParamVector {
        match theta {
            Some(t) => ParamVector::new(t.clone()).expect("validated"),
            None => ParamVector::zeros(self.theta_dim().unwrap_or(1)),
        }
    }

    pub fn mdp(&self) -> Option<&TabularMdp> {
        match &self.env {
            Some(Env::Tabular(m)) => Some(m),
            _ => None,
        }
    }

    /// Core run configuration for the `run` experiment.
    pub fn run_config(&self) -> Option<RunConfig> {
        let Section::Run(r) = &self.section else { return None };
        Some(RunConfig {
            algo: r.algo,
            iterations: r.iterations,
            batch: r.batch,
            gamma: r.gamma,
            schedule: r.schedule,
            xi: r.xi,
            seed: self.seed,
            oracle_tracking: r.oracle_tracking,
            record_theta: r.record_theta,
        })
    }
}

fn validate(cfg: &ExperimentConfig, errs: &mut Vec<String>) {
    let dim = cfg.theta_dim();
    let tabular = matches!(cfg.env, Some(Env::Tabular(_)));
    let softmax = matches!(cfg.policy, Some(PolicySpec::TabularSoftmax { .. }));
    if let (Some(Env::Tabular(m)), Some(PolicySpec::TabularSoftmax { features: Some(f) })) = (&cfg.env, &cfg.policy) {
        if f.len() != m.n_states() * m.n_actions() {
            errs.push(format!(
                "policy.features needs {} rows (one per state-action pair), got {}",
                m.n_states() * m.n_actions(),
                f.len()
            ));
        }
    }
    let need_tabular_softmax = |errs: &mut Vec<String>| {
        if !tabular {
            errs.push(format!("env.kind must be tabular or bundled_chain for {}", cfg.experiment));
        }
        if !softmax {
            errs.push(format!("policy.kind must be tabular_softmax for {}", cfg.experiment));
        }
    };
    let need_matching_pair = |errs: &mut Vec<String>| match (&cfg.env, &cfg.policy) {
        (Some(Env::Tabular(_)), Some(PolicySpec::TabularSoftmax { .. }))
        | (Some(Env::Exploration { .. }), Some(PolicySpec::GeneralizedGaussian { .. })) => {}
        (Some(Env::UnitBall { dim }), Some(PolicySpec::SafeLogBarrier { phi_star })) => {
            if phi_star.len() != *dim {
                errs.push(format!("policy.phi_star has length {}, env.dim is {dim}", phi_star.len()));
            }
        }
        (Some(_), Some(_)) => errs.push(
            "policy.kind does not match env.kind (tabular ↔ tabular_softmax, exploration ↔ generalized_gaussian, unit_ball ↔ safe_log_barrier)"
                .into(),
        ),
        _ => {}
    };

    match &cfg.section {
        Section::Run(r) => {
            need_matching_pair(errs);
            check_positive("run.iterations", r.iterations, errs);
            check_positive("run.batch", r.batch, errs);
            check_gamma("run.gamma", r.gamma, errs);
            check_schedule(&r.schedule, errs);
            match (r.algo, r.xi) {
                (Algorithm::Npg, None) => errs.push("run.xi is required when algo = \"npg\"".into()),
                (_, Some(xi)) => check_xi("run.xi", xi, errs),
                _ => {}
            }
            if r.oracle_tracking && !tabular {
                errs.push("run.oracle_tracking needs a tabular env".into());
            }
            check_theta("run.theta0", &r.theta0, dim, errs);
        }
        Section::Exploration(x) => {
            check_finite("exploration.theta_star", x.theta_star, errs);
            check_finite("exploration.theta0", x.theta0, errs);
            check_positive("exploration.batch", x.batch, errs);
            check_positive("exploration.iterations", x.iterations, errs);
            check_positive("exploration.seeds", x.seeds, errs);
            if !(x.lambda > 0.0 && x.lambda.is_finite()) {
                errs.push(format!("exploration.lambda must lie in (0,∞), got {}", x.lambda));
            }
            if x.kappas.is_empty() {
                errs.push("exploration.kappas must not be empty".into());
            }
            for k in &x.kappas {
                check_kappa("exploration.kappas", *k, errs);
            }
            if !(x.region_half_width > 0.0) {
                errs.push(format!("exploration.region_half_width must be positive, got {}", x.region_half_width));
            }
        }
        Section::TailScan(t) => {
            if t.kappas.len() != 2 {
                errs.push(format!("tail_scan.kappas must list exactly two values, got {}", t.kappas.len()));
            }
            for k in &t.kappas {
                check_kappa("tail_scan.kappas", *k, errs);
            }
            if !(t.grid_min < t.grid_max) {
                errs.push(format!("tail_scan.grid_min ({}) must be below tail_scan.grid_max ({})", t.grid_min, t.grid_max));
            }
            if t.grid_points < 2 {
                errs.push("tail_scan.grid_points must be at least 2".into());
            }
            check_positive("tail_scan.n_actions", t.n_actions, errs);
            check_finite("tail_scan.reference", t.reference, errs);
        }
        Section::MomentProbe(m) => {
            need_matching_pair(errs);
            check_positive("moment_probe.n_max", m.n_max, errs);
            if let Some(g) = m.gamma {
                check_gamma("moment_probe.gamma", g, errs);
            }
            if let Some(c) = &m.checkpoints {
                if c.is_empty() || c.windows(2).any(|w| w[1] <= w[0]) {
                    errs.push("moment_probe.checkpoints must be non-empty and strictly increasing".into());
                }
                if c.first() == Some(&0) || c.last().is_some_and(|l| *l > m.n_max) {
                    errs.push(format!("moment_probe.checkpoints must lie in 1..={}", m.n_max));
                }
            }
            check_theta("moment_probe.theta", &m.theta, dim, errs);
        }
        Section::SmoothnessProbe(s) => {
            match &cfg.policy {
                Some(PolicySpec::TabularSoftmax { .. }) if !tabular => {
                    errs.push("env.kind must be tabular or bundled_chain for a softmax smoothness probe".into())
                }
                Some(PolicySpec::SafeLogBarrier { .. }) => errs.push(
                    "policy.kind must be tabular_softmax or generalized_gaussian for smoothness_probe".into(),
                ),
                _ => {}
            }
            if let Some(r) = &s.radii {
                if r.len() < 2 || r.iter().any(|x| !(*x > 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
                    errs.push("smoothness_probe.radii must hold at least two positive, increasing values".into());
                }
            }
            check_positive("smoothness_probe.n_directions", s.n_directions, errs);
            check_positive("smoothness_probe.kink_points", s.kink_points, errs);
            check_theta("smoothness_probe.theta", &s.theta, dim, errs);
        }
        Section::ErgodicityProbe(e) => {
            need_tabular_softmax(errs);
            check_positive("ergodicity_probe.n_max", e.n_max, errs);
            if let Some(t) = e.trials {
                check_positive("ergodicity_probe.trials", t, errs);
            }
            if !(e.floor > 0.0 && e.floor < 1.0) {
                errs.push(format!("ergodicity_probe.floor must lie in (0,1), got {}", e.floor));
            }
            check_theta("ergodicity_probe.theta", &e.theta, dim, errs);
        }
        Section::NoiseProbe(n) => {
            need_tabular_softmax(errs);
            if n.batches.is_empty() || n.batches.contains(&0) {
                errs.push("noise_probe.batches must be a non-empty list of positive sizes".into());
            }
            if n.repeats < 2 {
                errs.push("noise_probe.repeats must be at least 2".into());
            }
            check_theta("noise_probe.theta", &n.theta, dim, errs);
        }
        Section::OracleCheck(o) => {
            need_tabular_softmax(errs);
            if !(o.theta_scale > 0.0 && o.theta_scale.is_finite()) {
                errs.push(format!("oracle_check.theta_scale must be positive, got {}", o.theta_scale));
            }
            check_theta("oracle_check.theta", &o.theta, dim, errs);
        }
        Section::RateSweep(r) => {
            need_tabular_softmax(errs);
            if r.algos.is_empty() {
                errs.push("rate_sweep.algos must not be empty".into());
            }
            if r.lambdas.is_empty() || r.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                errs.push("rate_sweep.lambdas must be a non-empty list of positive values".into());
            }
            check_positive("rate_sweep.batch", r.batch, errs);
            if let Some(g) = r.gamma {
                check_gamma("rate_sweep.gamma", g, errs);
            }
            check_xi("rate_sweep.xi", r.xi, errs);
            let end = r.window_end.unwrap_or(r.iterations);
            if r.window_start == 0 || end > r.iterations || end < r.window_start + 4 {
                errs.push(format!(
                    "rate_sweep.window_start/window_end must give at least 5 horizons within 1..={}",
                    r.iterations
                ));
            }
            if let Some(th) = r.grad_threshold {
                if !(th > 0.0) {
                    errs.push(format!("rate_sweep.grad_threshold must be positive, got {th}"));
                }
            }
            check_theta("rate_sweep.theta0", &r.theta0, dim, errs);
        }
    }
}
