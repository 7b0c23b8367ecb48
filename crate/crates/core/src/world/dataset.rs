use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, GenConfig};
use super::generate::build_world;
use super::WorldInstance;
use crate::dsl::template_signature;
use crate::rng;

/// Passage ids per split plus question counts per program template.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    #[serde(default)]
    pub template_counts: BTreeMap<String, usize>,
}

impl SplitManifest {
    pub fn split_of(&self, passage_id: &str) -> Option<&'static str> {
        let has = |v: &Vec<String>| v.iter().any(|p| p == passage_id);
        if has(&self.train) {
            Some("train")
        } else if has(&self.dev) {
            Some("dev")
        } else if has(&self.test) {
            Some("test")
        } else {
            None
        }
    }

    pub fn ids(&self, split: &str) -> Option<&[String]> {
        match split {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub worlds: Vec<WorldInstance>,
    pub manifest: SplitManifest,
}

/// Seeded permutation of passage ids cut into train/dev/test.
pub fn passage_split(ids: &[String], seed: u64, train_fraction: f64, dev_fraction: f64) -> SplitManifest {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng::rng(rng::stream(seed, "split")));
    let n = ids.len() as f64;
    let n_train = libm::round(n * train_fraction) as usize;
    let n_dev = (libm::round(n * dev_fraction) as usize).min(ids.len() - n_train.min(ids.len()));
    let n_train = n_train.min(ids.len());
    let pick = |range: core::ops::Range<usize>| {
        let mut v: Vec<String> = order[range].iter().map(|&i| ids[i].clone()).collect();
        v.sort();
        v
    };
    SplitManifest {
        train: pick(0..n_train),
        dev: pick(n_train..n_train + n_dev),
        test: pick(n_train + n_dev..ids.len()),
        template_counts: BTreeMap::new(),
    }
}

/// `n_passages` worlds with ids `p00000`, `p00001`, ...; passage `i` uses
/// seed `mix(seed, i)`.
pub fn generate_dataset(seed: u64, config: &GenConfig, n_passages: usize) -> Result<Dataset, ConfigError> {
    config.validate()?;
    if n_passages == 0 {
        return Err(ConfigError::new("n_passages", "at least one passage is required"));
    }
    let worlds: Vec<WorldInstance> = (0..n_passages)
        .map(|i| build_world(rng::mix(seed, i as u64), config, &format!("p{i:05}")))
        .collect();
    let ids: Vec<String> = worlds.iter().map(|w| w.id.clone()).collect();
    let mut manifest = passage_split(&ids, seed, config.train_fraction, config.dev_fraction);
    for w in &worlds {
        for q in &w.questions {
            *manifest.template_counts.entry(template_signature(&q.program).0).or_default() += 1;
        }
    }
    Ok(Dataset { worlds, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_ratio() {
        let d = generate_dataset(1, &GenConfig::default(), 100).unwrap();
        assert_eq!((d.manifest.train.len(), d.manifest.dev.len(), d.manifest.test.len()), (80, 10, 10));
        let mut all: Vec<&String> = d.manifest.train.iter().chain(&d.manifest.dev).chain(&d.manifest.test).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn zero_passages_rejected() {
        assert!(generate_dataset(1, &GenConfig::default(), 0).is_err());
    }

    #[test]
    fn min_max_count_templates_only() {
        let d = generate_dataset(2, &GenConfig::min_max_count(), 40).unwrap();
        for sig in d.manifest.template_counts.keys() {
            assert!(
                sig.starts_with("count(") || sig.starts_with("find-num(find-m") || sig.starts_with("project("),
                "{sig}"
            );
        }
    }
}
