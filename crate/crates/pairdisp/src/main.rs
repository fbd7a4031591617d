use anyhow::Result;
use clap::Parser;
use pairdisp::config::{Experiment, ExperimentConfig};
use pairdisp::exec::WORKERS_ENV;
use std::path::PathBuf;
use std::process::ExitCode;

/// Reflected inertial-pair dispersion experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn try_main() -> Result<bool> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = cli.experiment;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let m = pairdisp::run(&cfg)?;
    for (name, ok) in &m.outcomes {
        println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    println!("config sha256 {}", m.config_sha256);
    Ok(m.passed)
}
