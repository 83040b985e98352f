//! Run configuration: one JSON file mirroring the model, training, and
//! pretraining knobs, with every leaf overridable from the command line.
//!
//! A config file may carry any subset of the three top-level sections;
//! omitted sections take the desk-scale defaults below. A section that is
//! present must be complete — unknown or missing keys inside it are
//! rejected, so a typo never silently falls back to a default. Overrides
//! use dotted paths into the JSON tree (`--set train.steps=500`,
//! `--set model.kernels=4`); the path must name an existing leaf and the
//! value must parse as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use visage_core::config::ModelConfig;
use visage_core::train::TrainConfig;

use crate::error::{CliError, Result};
use crate::formats::read_json;

/// Discriminator pretraining knobs (both pretrained nets share them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub sync_steps: usize,
    pub style_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Clips per style reserved for the held-out metric report.
    pub holdout_per_style: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            sync_steps: 400,
            style_steps: 300,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            holdout_per_style: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub pretrain: PretrainConfig,
}

impl Default for RunConfig {
    /// Desk-scale model with stock training knobs: the configuration every
    /// command starts from when no file is given.
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::desk(),
            train: TrainConfig::default(),
            pretrain: PretrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| CliError::usage(format!("model config: {e}")))?;
        if self.train.batch_size == 0 {
            return Err(CliError::usage("train.batch_size must be positive"));
        }
        for (name, lr) in [
            ("train.learning_rate", self.train.learning_rate),
            ("train.critic_learning_rate", self.train.critic_learning_rate),
            ("pretrain.learning_rate", self.pretrain.learning_rate),
        ] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(CliError::usage(format!("{name} must be positive and finite")));
            }
        }
        if self.pretrain.batch_size == 0 {
            return Err(CliError::usage("pretrain.batch_size must be positive"));
        }
        Ok(())
    }
}

/// Load the config file (or defaults), apply `--set key=value` overrides,
/// and validate the result.
pub fn load_run_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let parsed: RunConfig = match path {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    let mut value = serde_json::to_value(&parsed)
        .map_err(|e| CliError::run(format!("re-serialize config: {e}")))?;
    for spec in sets {
        apply_set(&mut value, spec)?;
    }
    let cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::usage(format!("config after overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Apply one `path.to.key=json-value` override in place. The dotted path
/// must already exist, and the value must keep the same JSON shape class
/// (scalar for scalar, array for array).
fn apply_set(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--set expects key=value, got \"{spec}\"")))?;
    let mut cur = &mut *root;
    for seg in path.split('.') {
        cur = cur
            .get_mut(seg)
            .ok_or_else(|| CliError::usage(format!("unknown config key \"{path}\"")))?;
    }
    let new: serde_json::Value = serde_json::from_str(raw)
        .map_err(|_| CliError::usage(format!("value for \"{path}\" is not valid JSON: \"{raw}\"")))?;
    if cur.is_object() || new.is_object() {
        return Err(CliError::usage(format!(
            "\"{path}\" does not name a single configuration value"
        )));
    }
    if cur.is_array() != new.is_array() {
        return Err(CliError::usage(format!(
            "value for \"{path}\" has the wrong shape (expected {})",
            if cur.is_array() { "an array" } else { "a scalar" }
        )));
    }
    *cur = new;
    Ok(())
}
