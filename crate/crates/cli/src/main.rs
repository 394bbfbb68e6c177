use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holderpg_cli::config::Experiment;
use holderpg_cli::{execute, EXIT_INVALID};

#[derive(Parser)]
#[command(name = "holderpg", version, about = "Policy-gradient experiments for Hölder-smooth policy classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single PG or NPG run.
    Run(Common),
    /// Mean score difference along a 1-D parameter scan for two generalized Gaussians.
    TailScan(Common),
    /// Exploration bandit: iterations until the batch reward crosses a threshold, per κ and seed.
    Exploration(Common),
    /// Running L2 average and running max of the score norm.
    MomentProbe(Common),
    /// Hölder exponents of the policy KL and the score.
    SmoothnessProbe(Common),
    /// Total-variation decay of the state chain toward its stationary law.
    ErgodicityProbe(Common),
    /// Minibatch gradient noise against its variance bound.
    NoiseProbe(Common),
    /// Exact-oracle identities; exits with 3 if any fails.
    OracleCheck(Common),
    /// Constant-rate PG/NPG runs with convergence-rate fits.
    RateSweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Run(c) => (Experiment::Run, c),
        Command::TailScan(c) => (Experiment::TailScan, c),
        Command::Exploration(c) => (Experiment::Exploration, c),
        Command::MomentProbe(c) => (Experiment::MomentProbe, c),
        Command::SmoothnessProbe(c) => (Experiment::SmoothnessProbe, c),
        Command::ErgodicityProbe(c) => (Experiment::ErgodicityProbe, c),
        Command::NoiseProbe(c) => (Experiment::NoiseProbe, c),
        Command::OracleCheck(c) => (Experiment::OracleCheck, c),
        Command::RateSweep(c) => (Experiment::RateSweep, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("--threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("--threads: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    let report = execute(experiment, &common.config, common.seed, common.output);
    for line in &report.stdout {
        println!("{line}");
    }
    for line in &report.stderr {
        eprintln!("{line}");
    }
    ExitCode::from(report.code)
}
