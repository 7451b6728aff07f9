//! Experiment runner entry point.  Exit codes: 0 success, 1 runtime failure,
//! 2 config validation failure.

use clap::Parser;
use snse::config::{Command, ExperimentConfig};
use snse::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "snse", about = "Pseudo-spectral stochastic Navier-Stokes experiments")]
struct Cli {
    /// Path to the TOML experiment config.
    config: PathBuf,
    /// Override the command declared in the config.
    #[arg(long)]
    command: Option<Command>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ExperimentConfig::from_path(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(cmd) = cli.command {
        cfg.command = cmd;
        if let Err(e) = cfg.validate() {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    }
    match runner::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(1)
        }
    }
}
