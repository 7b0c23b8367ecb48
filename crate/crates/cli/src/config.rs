//! Flat `key = value` configuration shared by every command.
//!
//! Lines are `key = value`; `#` starts a comment. Keys belong to the
//! generator (`game_fraction`, `mix.count`, ...), the model (`dim`, `tau_end`,
//! ...) or training (`lambda_paired`, `epochs`, ...). A command reads the keys
//! it needs; unknown keys are rejected.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;
use modpair_core::executor::ModelConfig;
use modpair_core::training::TrainConfig;
use modpair_core::world::GenConfig;

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub gen: GenConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Applied settings in file order.
    pub entries: Vec<(String, String)>,
}

/// Every accepted key.
pub fn all_keys() -> Vec<String> {
    let mut keys = GenConfig::keys();
    keys.extend(ModelConfig::KEYS.iter().map(|s| s.to_string()));
    keys.extend(TrainConfig::KEYS.iter().map(|s| s.to_string()));
    keys
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let gen_keys = GenConfig::keys();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::invalid(format!("{origin}:{}: {msg}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = if gen_keys.iter().any(|k| k == key) {
                cfg.gen.apply(key, value).map(|_| true)
            } else if ModelConfig::KEYS.contains(&key) {
                cfg.model.apply(key, value)
            } else {
                cfg.train.apply(key, value)
            };
            match known {
                Ok(true) => cfg.entries.push((key.to_string(), value.to_string())),
                Ok(false) => return Err(at(format!("unknown key `{key}`"))),
                Err(e) => return Err(at(e.to_string())),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                RunConfig::parse(&text, &p.display().to_string())
            }
        }
    }

    /// SHA-256 of the applied settings, one `key=value` per line in file order.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let cfg = RunConfig::parse("# comment\ndim = 24\nlambda_paired=0\nmix.count = 3 # inline\npreset=default\n", "t").unwrap();
        assert_eq!(cfg.model.dim, 24);
        assert_eq!(cfg.train.lambda_paired, 0.0);
        assert_eq!(cfg.entries.len(), 4);
    }

    #[test]
    fn errors_name_the_line() {
        let err = RunConfig::parse("dim = 8\nbogus = 1\n", "cfg.txt").unwrap_err();
        assert_eq!(err.to_string(), "cfg.txt:2: unknown key `bogus`");
        let err = RunConfig::parse("epochs = many\n", "cfg.txt").unwrap_err();
        assert!(err.to_string().starts_with("cfg.txt:1: "), "{err}");
        assert!(RunConfig::parse("no equals sign", "c").is_err());
    }

    #[test]
    fn every_key_is_accepted() {
        let defaults = RunConfig::default();
        for key in all_keys() {
            let value = if key == "preset" {
                "default".to_string()
            } else if key == "event_kinds" {
                "field-goal,battle".to_string()
            } else if let Some(v) = defaults.train.get(&key) {
                v
            } else {
                "1".to_string()
            };
            RunConfig::parse(&format!("{key} = {value}"), "k").unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
