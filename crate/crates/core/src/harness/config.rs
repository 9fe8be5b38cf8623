use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, INFLOW_LENGTHS};
use crate::error::{Error, Result};
use crate::perturbation::{
    position_indices, NoiseChannel, NoiseKind, NoiseMode, NoiseProfile, ACTION_STD, MERGE_EDGE_STD, OTHER_STD,
    POSITION_STD,
};
use crate::env::ENTRANCE_DISTANCE;
use crate::trainer::PpoConfig;

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "ROUNDABOUT_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub mode: NoiseMode,
    pub position_std: f64,
    pub merge_edge_std: f64,
    pub other_std: f64,
    pub action_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            mode: NoiseMode::None,
            position_std: POSITION_STD,
            merge_edge_std: MERGE_EDGE_STD,
            other_std: OTHER_STD,
            action_std: ACTION_STD,
        }
    }
}

impl NoiseConfig {
    pub fn profile(&self) -> NoiseProfile {
        let mut p = NoiseProfile::new(self.mode);
        p.state_std.fill(self.other_std);
        for i in ENTRANCE_DISTANCE {
            p.state_std[i] = self.merge_edge_std;
        }
        for i in position_indices() {
            p.state_std[i] = self.position_std;
        }
        for i in INFLOW_LENGTHS {
            p.state_std[i] = 0.0;
        }
        p.action_std = self.action_std;
        p
    }

    pub fn channel(&self) -> NoiseChannel {
        match (self.kind, self.mode) {
            (_, NoiseMode::None) => NoiseChannel::Clean,
            (NoiseKind::Gaussian, _) => NoiseChannel::Gaussian(self.profile()),
            (NoiseKind::Adversarial, mode) => NoiseChannel::from_settings(NoiseKind::Adversarial, mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Evaluation episodes for `baseline` and `evaluate`.
    pub trials: usize,
    pub output_dir: PathBuf,
    /// Save a policy checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    pub env: EnvConfig,
    pub noise: NoiseConfig,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            output_dir: PathBuf::from("runs"),
            checkpoint_every: 10,
            env: EnvConfig::default(),
            noise: NoiseConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        self.noise.profile().validate()?;
        Ok(())
    }

    /// `output_dir`, unless the override variable is set and nonempty.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}
