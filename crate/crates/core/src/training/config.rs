use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::pairing::PairSource;
use crate::world::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the paired term; 0 trains on answers alone.
    pub lambda_paired: f64,
    pub epochs: usize,
    /// Examples per optimizer step, probes included.
    pub batch_size: usize,
    pub lr: f64,
    /// Final learning rate as a fraction of `lr`; the rate decays linearly
    /// over the configured epochs.
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub eps_kl: f64,
    pub seed: u64,
    /// Links from other sources are ignored.
    pub pair_sources: BTreeSet<PairSource>,
    /// Epochs without a dev F1 improvement before stopping; 0 never stops early.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_paired: 1.0,
            epochs: 20,
            batch_size: 16,
            lr: 3e-3,
            lr_decay: 0.1,
            clip_norm: 5.0,
            eps_kl: 1e-8,
            seed: 0,
            pair_sources: PairSource::ALL.into_iter().collect(),
            patience: 10,
        }
    }
}

fn parse<T: core::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::new(key, format!("cannot parse `{v}`")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 10] =
        ["lambda_paired", "epochs", "batch_size", "lr", "lr_decay", "clip_norm", "eps_kl", "seed", "pair_sources", "patience"];

    /// Sets one field from its `key=value` form; returns `false` for keys that
    /// are not training keys.
    pub fn apply(&mut self, key: &str, v: &str) -> Result<bool, ConfigError> {
        match key {
            "lambda_paired" => self.lambda_paired = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "lr_decay" => self.lr_decay = parse(key, v)?,
            "clip_norm" => self.clip_norm = parse(key, v)?,
            "eps_kl" => self.eps_kl = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "pair_sources" => {
                self.pair_sources = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<PairSource>().map_err(|e| ConfigError::new(key, e)))
                    .collect::<Result<_, _>>()?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// The value of `key` in `key=value` form.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "lambda_paired" => format!("{}", self.lambda_paired),
            "epochs" => format!("{}", self.epochs),
            "batch_size" => format!("{}", self.batch_size),
            "lr" => format!("{}", self.lr),
            "lr_decay" => format!("{}", self.lr_decay),
            "clip_norm" => format!("{}", self.clip_norm),
            "eps_kl" => format!("{}", self.eps_kl),
            "seed" => format!("{}", self.seed),
            "patience" => format!("{}", self.patience),
            "pair_sources" => self.pair_sources.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda_paired >= 0.0 && self.lambda_paired.is_finite()) {
            return Err(ConfigError::new("lambda_paired", "must be finite and non-negative"));
        }
        if self.batch_size < 2 {
            return Err(ConfigError::new("batch_size", "must be at least 2 so both sides of a pair fit"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ConfigError::new("lr", "must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(ConfigError::new("lr_decay", "must lie in (0, 1]"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(ConfigError::new("clip_norm", "must be positive"));
        }
        if !(self.eps_kl > 0.0 && self.eps_kl < 1e-2) {
            return Err(ConfigError::new("eps_kl", "must lie in (0, 0.01)"));
        }
        Ok(())
    }

    /// Optimizer settings after `progress` ∈ [0, 1] of training.
    pub fn adam(&self, progress: f64) -> AdamConfig {
        let lr = self.lr * (1.0 - (1.0 - self.lr_decay) * progress.clamp(0.0, 1.0));
        AdamConfig { lr, clip_norm: Some(self.clip_norm), ..AdamConfig::default() }
    }
}
