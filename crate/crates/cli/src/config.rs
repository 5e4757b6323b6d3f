//! Experiment configuration files and the built-in presets.

use std::path::{Path, PathBuf};

use cdjp_core::cdjp::{ControlMode, ScalarBundle};
use cdjp_core::control::{AnnealConfig, ShootingProblem};
use cdjp_core::gauss::GaussBenchConfig;
use cdjp_core::presets::{gauss_preset, shooting_preset, PRESET_NAMES};
use cdjp_core::stats::DEFAULT_THRESHOLDS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ShootingProblem>,
    /// Fidelity the optimal solve is expected to reach; only reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fidelity: Option<f64>,
    #[serde(default)]
    pub anneal: AnnealConfig,
    #[serde(default)]
    pub sample: SampleSettings,
    #[serde(default)]
    pub batch: BatchSettings,
    #[serde(default)]
    pub mlp: MlpSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauss: Option<GaussBenchConfig>,
    /// Base seed of the trajectory batches.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSettings {
    pub anneal: AnnealConfig,
    pub gate: f64,
    /// Number of Fourier harmonics.
    pub n_c: usize,
}

impl Default for SampleSettings {
    fn default() -> Self {
        SampleSettings {
            anneal: AnnealConfig::default(),
            gate: 0.95,
            n_c: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSettings {
    pub n_traj: usize,
    pub thresholds: Vec<f64>,
}

impl Default for BatchSettings {
    fn default() -> Self {
        BatchSettings {
            n_traj: 2000,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

/// Settings for a single most-likely-path run. Without a bundle the σ = 1
/// guess of the problem is used; without a mode the optimal controls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle0: Option<ScalarBundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ControlMode>,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let base = ExperimentConfig {
            version: SCHEMA_VERSION,
            name: name.to_string(),
            problem: None,
            target_fidelity: None,
            anneal: AnnealConfig::default(),
            sample: SampleSettings::default(),
            batch: BatchSettings::default(),
            mlp: MlpSettings::default(),
            gauss: None,
            seed: DEFAULT_SEED,
            out: None,
        };
        if name == "gauss-theta0" {
            return Ok(ExperimentConfig {
                gauss: Some(gauss_preset()),
                ..base
            });
        }
        let p = shooting_preset(name).ok_or_else(|| {
            ConfigError(format!(
                "unknown preset `{name}` (known: {})",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Ok(ExperimentConfig {
            problem: Some(p.problem),
            target_fidelity: Some(p.target_fidelity),
            anneal: p.anneal,
            sample: SampleSettings {
                anneal: p.sample_anneal,
                gate: p.sample_gate,
                n_c: p.n_c,
            },
            ..base
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Seeds the batches and the optimal annealer with `seed`, the sample annealer with `seed + 1`.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.anneal.seed = seed;
        self.sample.anneal.seed = seed.wrapping_add(1);
    }

    /// Checks every section that is present.
    pub fn resolve(self) -> Result<Self, ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        let bad = |e: cdjp_core::Error| ConfigError(e.to_string());
        if let Some(p) = &self.problem {
            p.validate().map_err(bad)?;
            p.kets().map_err(bad)?;
        }
        if self.problem.is_none() && self.gauss.is_none() {
            return Err(ConfigError(
                "config needs a `problem` or a `gauss` section".into(),
            ));
        }
        if self.batch.n_traj == 0 {
            return Err(ConfigError("batch.n_traj must be at least 1".into()));
        }
        if self
            .batch
            .thresholds
            .iter()
            .any(|t| !(0.0..1.0).contains(t))
        {
            return Err(ConfigError("batch thresholds must lie in [0, 1)".into()));
        }
        if let Some(g) = &self.gauss {
            if !(g.tau > 0.0 && g.dt > 0.0 && g.t_f >= 0.0) {
                return Err(ConfigError(
                    "gauss: tau, dt must be positive and t_f non-negative".into(),
                ));
            }
        }
        Ok(self)
    }

    pub fn problem(&self) -> Result<&ShootingProblem, ConfigError> {
        self.problem
            .as_ref()
            .ok_or_else(|| ConfigError(format!("config `{}` has no `problem` section", self.name)))
    }

    /// First 16 hex digits of the SHA-256 of the config, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}
