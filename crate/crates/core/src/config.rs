//! Run configuration: everything a training or evaluation run needs, as
//! one TOML-serializable document, plus the named experiment presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::perturb::PerturbationSpec;
use crate::env::randomize::RandomizationSpec;
use crate::env::{EnvConfig, Mode, ReferenceParams};
use crate::model::ModelSpec;
use crate::ppo::PpoConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which randomization ranges an evaluation applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RandomizationPreset {
    Off,
    #[default]
    Train,
    Test,
}

impl RandomizationPreset {
    pub fn spec(&self) -> RandomizationSpec {
        match self {
            RandomizationPreset::Off => RandomizationSpec::nominal(),
            RandomizationPreset::Train => RandomizationSpec::train(),
            RandomizationPreset::Test => RandomizationSpec::test(),
        }
    }
}

/// The complete run document. Seeds are explicit: nothing in a run reads
/// the wall clock for randomness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Experiment mode: clean, perturbed or human.
    pub mode: Mode,
    /// Optional path to a model spec TOML; the built-in exoskeleton when
    /// absent.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    pub seed: u64,
    #[serde(default)]
    pub randomization: RandomizationPreset,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    /// Evaluation length in squat cycles.
    pub eval_cycles: usize,
    /// Environments in an out-of-distribution sweep.
    pub sweep_envs: usize,
    /// Write per-step telemetry CSV during evaluation.
    pub telemetry: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Clean,
            model_path: None,
            seed: 0,
            randomization: RandomizationPreset::Train,
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            eval_cycles: 3,
            sweep_envs: 200,
            telemetry: true,
        }
    }
}

impl RunConfig {
    /// Case 1: squatting without perturbation. Training randomizes over
    /// the train ranges; robustness evaluation uses the wider test ranges.
    pub fn case1() -> Self {
        Self::default()
    }

    /// Case 2: random adversary forces on hip, femurs and tibias during
    /// training and evaluation.
    pub fn case2() -> Self {
        let mut cfg = Self::default();
        cfg.mode = Mode::Perturbed;
        cfg.env.mode = Mode::Perturbed;
        cfg
    }

    /// Case 2 stress variant: perturbations scaled by 1.75, up to 350 N at
    /// the hip.
    pub fn case2_stress() -> Self {
        let mut cfg = Self::case2();
        cfg.env.perturbation = PerturbationSpec::default().stress();
        cfg
    }

    /// Case 3: the passive human strapped in.
    pub fn case3() -> Self {
        let mut cfg = Self::default();
        cfg.mode = Mode::Human;
        cfg.env.mode = Mode::Human;
        cfg
    }

    /// Desk-scale preset: 64/64 networks and a 2M-sample budget on the
    /// nominal clean environment; used by the training smoke test.
    /// Training episodes start at random reference phases so every part of
    /// the cycle is practiced.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.ppo = PpoConfig::desk();
        cfg.randomization = RandomizationPreset::Off;
        cfg.env.randomization = RandomizationSpec::nominal();
        cfg.env.reset_phase = crate::env::ResetPhase::UniformCycle;
        cfg
    }

    /// Full-scale preset mirroring the published training setup: 256/256/128
    /// networks, 20M samples, train-range randomization.
    pub fn full() -> Self {
        let mut cfg = Self::default();
        cfg.ppo = PpoConfig::default();
        cfg
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "case1" => Some(Self::case1()),
            "case2" => Some(Self::case2()),
            "case2_stress" => Some(Self::case2_stress()),
            "case3" => Some(Self::case3()),
            "desk" => Some(Self::desk()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }

    pub const PRESET_NAMES: [&'static str; 6] =
        ["case1", "case2", "case2_stress", "case3", "desk", "full"];

    /// Resolve the model spec, loading from `model_path` when set.
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        match &self.model_path {
            None => Ok(crate::model::default_exoskeleton()),
            Some(path) => ModelSpec::load(path).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    /// Environment configuration with the evaluation randomization preset
    /// applied.
    pub fn env_for_eval(&self) -> EnvConfig {
        let mut env = self.env.clone();
        env.randomization = self.randomization.spec();
        env
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(path) = &self.model_path {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!(
                    "model_path {} does not exist",
                    path.display()
                )));
            }
        }
        if self.eval_cycles == 0 {
            return Err(ConfigError::Invalid("eval_cycles must be at least 1".into()));
        }
        if self.sweep_envs == 0 {
            return Err(ConfigError::Invalid("sweep_envs must be at least 1".into()));
        }
        if self.ppo.minibatch > self.ppo.buffer_size {
            return Err(ConfigError::Invalid(format!(
                "minibatch {} exceeds buffer {}",
                self.ppo.minibatch, self.ppo.buffer_size
            )));
        }
        if self.env.mode != self.mode {
            return Err(ConfigError::Invalid(format!(
                "env.mode {:?} disagrees with mode {:?}",
                self.env.mode, self.mode
            )));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml_string())
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    /// Reference shape shorthand used by eval horizons.
    pub fn reference(&self) -> ReferenceParams {
        self.env.reference
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_and_validate() {
        for name in RunConfig::PRESET_NAMES {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
        }
        assert!(RunConfig::preset("case9").is_none());
    }

    #[test]
    fn case_modes_are_wired() {
        assert_eq!(RunConfig::case1().env.mode, Mode::Clean);
        assert_eq!(RunConfig::case2().env.mode, Mode::Perturbed);
        assert_eq!(RunConfig::case3().env.mode, Mode::Human);
        assert!((RunConfig::case2_stress().env.perturbation.scale - 1.75).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::case2();
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.mode, Mode::Perturbed);
        assert_eq!(back.ppo.buffer_size, cfg.ppo.buffer_size);
        assert_eq!(back.env.reward.sigma_cop, cfg.env.reward.sigma_cop);
    }

    #[test]
    fn mismatched_modes_rejected() {
        let mut cfg = RunConfig::case2();
        cfg.mode = Mode::Clean;
        assert!(cfg.validate().is_err());
    }
}
