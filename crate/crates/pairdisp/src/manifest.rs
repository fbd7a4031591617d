//! Run manifests: enough to reproduce an output directory.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
    pub passed: bool,
    pub outcomes: Vec<(String, bool)>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, outcomes: Vec<(String, bool)>) -> Self {
        Manifest {
            experiment: cfg.experiment.name().to_string(),
            seed: cfg.seed,
            config_sha256: config_hash(cfg),
            version: env!("CARGO_PKG_VERSION").to_string(),
            passed: outcomes.iter().all(|o| o.1),
            outcomes,
        }
    }
}
