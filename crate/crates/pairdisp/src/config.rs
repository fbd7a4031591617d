//! TOML experiment configuration.

use anyhow::{bail, Context, Result};
use pairdisp_core::integrator::{StepConfig, System};
use pairdisp_core::lyapunov::{validate, LedgerChoices};
use pairdisp_core::ModelParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Verify,
    Figure1,
    Tails,
    Moments,
    Laplace,
    DriftProbe,
    Control,
    All,
}

impl Experiment {
    pub const EACH: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Verify,
        Experiment::Figure1,
        Experiment::Tails,
        Experiment::Moments,
        Experiment::Laplace,
        Experiment::DriftProbe,
        Experiment::Control,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Verify => "verify",
            Experiment::Figure1 => "figure1",
            Experiment::Tails => "tails",
            Experiment::Moments => "moments",
            Experiment::Laplace => "laplace",
            Experiment::DriftProbe => "drift-probe",
            Experiment::Control => "control",
            Experiment::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub h: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { gamma: 1.0, h: 0.1, kappa1: 1.0, kappa2: 1.0 }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.gamma, self.h, self.kappa1, self.kappa2)?)
    }
}

/// Any subset of the ledger choices; the rest come from the defaults for `h`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerOverrides {
    pub p1: Option<f64>,
    pub q1: Option<f64>,
    pub alpha1: Option<f64>,
    pub p2: Option<f64>,
    pub q2: Option<f64>,
    pub alpha2: Option<f64>,
    pub cone: Option<f64>,
    pub r_star: Option<f64>,
    pub eps0: Option<f64>,
    pub c_star: Option<f64>,
}

impl LedgerOverrides {
    pub fn is_empty(&self) -> bool {
        *self == LedgerOverrides::default()
    }

    pub fn apply(&self, mut c: LedgerChoices) -> LedgerChoices {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.p1, self.p1);
        set(&mut c.q1, self.q1);
        set(&mut c.alpha1, self.alpha1);
        set(&mut c.p2, self.p2);
        set(&mut c.q2, self.q2);
        set(&mut c.alpha2, self.alpha2);
        set(&mut c.cone, self.cone);
        set(&mut c.r_star, self.r_star);
        set(&mut c.eps0, self.eps0);
        set(&mut c.c_star, self.c_star);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub system: System,
    pub initial: [f64; 3],
    pub t_end: f64,
    pub stride: usize,
    pub paths: usize,
    /// Randomized paths checked for the reflection invariants.
    pub audit_paths: usize,
    pub audit_t_end: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            system: System::Xyz,
            initial: [0.3, 0.1, 0.7],
            t_end: 10.0,
            stride: 10,
            paths: 1,
            audit_paths: 10_000,
            audit_t_end: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub samples: usize,
    /// Sweep `(c*, C, r*)` instead of certifying the configured ledger as is.
    pub search: bool,
    /// Re-certify the result on a grid with twice the samples.
    pub doubling: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { samples: 10_000, search: true, doubling: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Section {
    pub h_values: Vec<f64>,
    pub t_end: f64,
    pub paths: usize,
    pub batches: usize,
    /// Log-spaced times at which the running average is written.
    pub checkpoints: usize,
}

impl Default for Figure1Section {
    fn default() -> Self {
        Figure1Section { h_values: vec![0.05, 0.1, 0.2, 0.5], t_end: 1e5, paths: 1, batches: 50, checkpoints: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsSection {
    pub h_values: Vec<f64>,
    pub t_end: f64,
    pub paths: usize,
    pub burn_in: f64,
    /// Target number of retained samples; fixes the sampling interval when no
    /// autocorrelation time is measured.
    pub min_samples: usize,
}

impl Default for TailsSection {
    fn default() -> Self {
        TailsSection { h_values: vec![0.4, 0.5], t_end: 2e4, paths: 4, burn_in: 0.1, min_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    pub h: f64,
    /// Exponents of `r^lambda`; empty means `{1, 0.8 (2/h)}`.
    pub lambdas: Vec<f64>,
    pub t_end: f64,
    pub paths: usize,
    pub batches: usize,
    pub burn_in: f64,
}

impl Default for MomentsSection {
    fn default() -> Self {
        MomentsSection { h: 0.5, lambdas: Vec::new(), t_end: 2e4, paths: 4, batches: 40, burn_in: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceSection {
    pub h: f64,
    pub kappa2: f64,
    pub cone: f64,
    pub s_values: Vec<f64>,
    /// Starting points as fractions of `eta*`.
    pub eta_fractions: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub t_cap: f64,
}

impl Default for LaplaceSection {
    fn default() -> Self {
        LaplaceSection {
            h: 0.1,
            kappa2: 1.0,
            cone: 10.0,
            s_values: vec![0.4, 0.8],
            eta_fractions: vec![0.0, 0.5, -0.5, 1.0, -1.0],
            paths: 10_000,
            dt: 1e-4,
            t_cap: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftProbeSection {
    pub initial: Vec<[f64; 3]>,
    pub times: Vec<f64>,
    pub paths: usize,
}

impl Default for DriftProbeSection {
    fn default() -> Self {
        DriftProbeSection {
            initial: vec![[1e7, 0.0, 1.0], [0.0, 5e6, 0.5], [3e6, 3e6, 0.9], [5e6, -5e6, 0.5], [2e6, 1e3, 0.01]],
            times: vec![0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            paths: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub radius: f64,
    /// Points per axis; the grid has `n^3` points per case.
    pub n: usize,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection { radius: 10.0, n: 5, horizon: 5.0, steps: 1 << 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Worker threads; 0 defers to the environment.
    pub workers: usize,
    pub out: PathBuf,
    pub model: ModelSection,
    pub ledger: LedgerOverrides,
    pub step: StepConfig,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
    pub figure1: Figure1Section,
    pub tails: TailsSection,
    pub moments: MomentsSection,
    pub laplace: LaplaceSection,
    pub drift_probe: DriftProbeSection,
    pub control: ControlSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Verify,
            seed: 1,
            workers: 0,
            out: PathBuf::from("out"),
            model: ModelSection::default(),
            ledger: LedgerOverrides::default(),
            step: StepConfig::default(),
            simulate: SimulateSection::default(),
            verify: VerifySection::default(),
            figure1: Figure1Section::default(),
            tails: TailsSection::default(),
            moments: MomentsSection::default(),
            laplace: LaplaceSection::default(),
            drift_probe: DriftProbeSection::default(),
            control: ControlSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).context("parsing configuration")?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// The configured ledger: defaults for `h` with the overrides applied.
    pub fn ledger_choices(&self) -> LedgerChoices {
        self.ledger.apply(LedgerChoices::default_for(self.model.h))
    }

    /// Checks the model, the step configuration and every ledger condition.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.params().context("model section")?;
        self.step.validate().map_err(|e| anyhow::anyhow!("step section: {e}"))?;
        let v = validate(&self.ledger_choices(), &model);
        if !v.is_empty() {
            bail!("invalid Lyapunov ledger: {}", v.join("; "));
        }
        if self.figure1.batches < 2 || self.moments.batches < 2 {
            bail!("batch counts must be at least 2");
        }
        if self.laplace.s_values.iter().any(|&s| !(s > 0.0 && s < self.laplace.h + 1.5)) {
            bail!("laplace: every s must lie in (0, h + 3/2)");
        }
        if self.drift_probe.times.iter().any(|&t| t < 0.0) {
            bail!("drift_probe: times must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = ExperimentConfig::from_toml("experiment = \"figure1\"\n[figure1]\nh_values = [0.1]\n").unwrap();
        assert_eq!(c.experiment, Experiment::Figure1);
        assert_eq!(c.figure1.h_values, vec![0.1]);
        assert_eq!(c.figure1.t_end, 1e5);
        assert_eq!(c.step, StepConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("[model]\ngama = 1.0\n").is_err());
    }

    #[test]
    fn bad_ledger_names_the_condition() {
        let c = ExperimentConfig::from_toml("[ledger]\nq1 = 0.5\n").unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("q1 must be 0"), "{e}");
    }
}
