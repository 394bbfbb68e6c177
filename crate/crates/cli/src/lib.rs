//! Command-line harness for the `holderpg` experiments: TOML configs, CSV
//! outputs and a checksummed manifest per run.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use config::{parse_config, Experiment, Overrides};
use output::Status;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;

/// What the binary prints and the exit code it returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub code: u8,
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
}

/// Parses the config and runs the experiment, mapping every failure mode to
/// its exit code.
pub fn execute(experiment: Experiment, config: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Report {
    let overrides = Overrides {
        seed,
        output_dir: output,
    };
    let cfg = match parse_config(config, experiment, &overrides) {
        Ok(c) => c,
        Err(e) => {
            return Report {
                code: EXIT_INVALID,
                stdout: Vec::new(),
                stderr: vec![e.to_string()],
            }
        }
    };
    match experiments::run_experiment(&cfg) {
        Ok(outcome) => {
            let mut stdout = outcome.summary;
            stdout.push(format!("outputs written to {}", cfg.output_dir.display()));
            let code = match outcome.status {
                Status::Ok => EXIT_OK,
                Status::Diverged => EXIT_DIVERGED,
                Status::CheckFailed => EXIT_CHECK_FAILED,
            };
            Report {
                code,
                stdout,
                stderr: Vec::new(),
            }
        }
        Err(e) => Report {
            code: EXIT_INVALID,
            stdout: Vec::new(),
            stderr: vec![format!("error: {e:#}")],
        },
    }
}
