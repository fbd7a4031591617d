//! Experiment runner for reflected inertial-pair dispersion.
//!
//! [`run`] executes one configured experiment (or all of them), writes CSV and
//! JSON artifacts, echoes the configuration and records a manifest.

pub mod config;
pub mod ergodics;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod runner;

use anyhow::{Context, Result};
use config::{Experiment, ExperimentConfig};
use manifest::Manifest;
use runner::Outcomes;
use std::path::Path;

fn run_one(exp: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<Outcomes> {
    Ok(match exp {
        Experiment::Simulate => runner::run_simulate(cfg, out)?,
        Experiment::Verify => runner::run_verify(cfg, out)?,
        Experiment::Figure1 => runner::run_figure1(cfg, out)?.0,
        Experiment::Tails => runner::run_tails(cfg, out)?.0,
        Experiment::Moments => runner::run_moments(cfg, out)?.0,
        Experiment::Laplace => runner::run_laplace(cfg, out)?.0,
        Experiment::DriftProbe => runner::run_drift_probe(cfg, out)?,
        Experiment::Control => runner::run_control(cfg, out)?.0,
        Experiment::All => unreachable!(),
    })
}

/// Validates `cfg`, runs it and writes `config.toml` and `manifest.json` into `cfg.out`.
///
/// The returned manifest has `passed == true` iff every enabled check passed.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    exec::init_workers(cfg.workers);
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    let exps: Vec<Experiment> = match cfg.experiment {
        Experiment::All => Experiment::EACH.to_vec(),
        e => vec![e],
    };
    let mut outcomes = Vec::new();
    for e in exps {
        for (name, ok) in run_one(e, cfg, out)? {
            outcomes.push((format!("{}/{name}", e.name()), ok));
        }
    }
    let m = Manifest::new(cfg, outcomes);
    io::write_json(&out.join("manifest.json"), &m)?;
    Ok(m)
}
