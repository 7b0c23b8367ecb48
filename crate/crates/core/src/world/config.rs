use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Domain, EventKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid config `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: &str, message: impl Into<String>) -> Self {
        ConfigError { key: key.to_string(), message: message.into() }
    }
}

/// Relative sampling weights of the question families.
///
/// Superlative families produce a `find-min-num` variant with probability
/// `GenConfig::min_rate`; comparisons pick `gt`/`lt` uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionMix {
    pub count: f64,
    pub count_filter: f64,
    pub max_num: f64,
    pub max_num_filter: f64,
    pub project_max: f64,
    pub project_max_filter: f64,
    pub num_single: f64,
    pub num_compare: f64,
    pub arith_simple: f64,
    pub arith_complex: f64,
    pub date_count: f64,
    pub date_single: f64,
    pub date_compare: f64,
    pub time_diff: f64,
}

impl Default for QuestionMix {
    fn default() -> Self {
        QuestionMix {
            count: 2.0,
            count_filter: 1.5,
            max_num: 2.0,
            max_num_filter: 1.0,
            project_max: 2.0,
            project_max_filter: 1.0,
            num_single: 0.5,
            num_compare: 0.7,
            arith_simple: 1.0,
            arith_complex: 1.0,
            date_count: 1.0,
            date_single: 1.0,
            date_compare: 2.0,
            time_diff: 2.0,
        }
    }
}

impl QuestionMix {
    /// Only count and superlative questions.
    pub fn min_max_count() -> Self {
        QuestionMix {
            count: 1.0,
            count_filter: 0.5,
            max_num: 1.0,
            max_num_filter: 0.5,
            project_max: 1.0,
            project_max_filter: 0.5,
            num_single: 0.0,
            num_compare: 0.0,
            arith_simple: 0.0,
            arith_complex: 0.0,
            date_count: 0.0,
            date_single: 0.0,
            date_compare: 0.0,
            time_diff: 0.0,
        }
    }

    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 14] {
        [
            ("count", &mut self.count),
            ("count_filter", &mut self.count_filter),
            ("max_num", &mut self.max_num),
            ("max_num_filter", &mut self.max_num_filter),
            ("project_max", &mut self.project_max),
            ("project_max_filter", &mut self.project_max_filter),
            ("num_single", &mut self.num_single),
            ("num_compare", &mut self.num_compare),
            ("arith_simple", &mut self.arith_simple),
            ("arith_complex", &mut self.arith_complex),
            ("date_count", &mut self.date_count),
            ("date_single", &mut self.date_single),
            ("date_compare", &mut self.date_compare),
            ("time_diff", &mut self.time_diff),
        ]
    }

    fn values(&self) -> [f64; 14] {
        let mut c = self.clone();
        let f = c.fields_mut();
        let mut out = [0.0; 14];
        for (o, (_, v)) in out.iter_mut().zip(f) {
            *o = *v;
        }
        out
    }
}

/// Generator settings. Every field has a documented valid range checked by
/// [`GenConfig::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Probability that a passage is from the game domain, in [0, 1].
    pub game_fraction: f64,
    /// Events per passage, within 4..=12.
    pub min_events: usize,
    pub max_events: usize,
    /// Enabled scoring and history kinds; at least three.
    pub event_kinds: Vec<EventKind>,
    /// Game yardage range, within [1, 80].
    pub value_min: i64,
    pub value_max: i64,
    /// History year range, within [1400, 2015].
    pub year_min: i32,
    pub year_max: i32,
    /// Probability that a game event slot holds a near-miss distractor.
    pub distractor_rate: f64,
    /// Probability that a history date also names a month.
    pub month_rate: f64,
    /// Probability that a kind phrase in a question uses a synonym form.
    pub synonym_rate: f64,
    /// Probability that a superlative question asks for the minimum.
    pub min_rate: f64,
    pub questions_per_passage: usize,
    pub mix: QuestionMix,
    /// Passage split fractions; test receives the remainder.
    pub train_fraction: f64,
    pub dev_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            game_fraction: 0.7,
            min_events: 4,
            max_events: 12,
            event_kinds: EventKind::PRIMARY.to_vec(),
            value_min: 1,
            value_max: 80,
            year_min: 1400,
            year_max: 2015,
            distractor_rate: 0.15,
            month_rate: 0.3,
            synonym_rate: 0.3,
            min_rate: 0.5,
            questions_per_passage: 10,
            mix: QuestionMix::default(),
            train_fraction: 0.8,
            dev_fraction: 0.1,
        }
    }
}

fn parse_num<T: core::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::new(key, format!("cannot parse `{value}`")))
}

impl GenConfig {
    /// Game-only passages with count and superlative questions.
    pub fn min_max_count() -> Self {
        GenConfig { game_fraction: 1.0, mix: QuestionMix::min_max_count(), ..Default::default() }
    }

    pub fn kinds_in(&self, domain: Domain) -> Vec<EventKind> {
        self.event_kinds.iter().copied().filter(|k| k.domain() == domain).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::new(key, "must lie in [0, 1]"))
            }
        };
        unit("game_fraction", self.game_fraction)?;
        unit("distractor_rate", self.distractor_rate)?;
        unit("month_rate", self.month_rate)?;
        unit("synonym_rate", self.synonym_rate)?;
        unit("min_rate", self.min_rate)?;
        unit("train_fraction", self.train_fraction)?;
        unit("dev_fraction", self.dev_fraction)?;
        if self.train_fraction + self.dev_fraction > 1.0 {
            return Err(ConfigError::new("dev_fraction", "train_fraction + dev_fraction exceeds 1"));
        }
        if self.min_events < 4 || self.max_events > 12 || self.min_events > self.max_events {
            return Err(ConfigError::new("min_events", "events per passage must satisfy 4 <= min <= max <= 12"));
        }
        let mut kinds = self.event_kinds.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() < 3 {
            return Err(ConfigError::new("event_kinds", "at least three event kinds are required"));
        }
        if kinds.iter().any(|k| k.is_distractor()) {
            return Err(ConfigError::new("event_kinds", "distractor kinds are implied, not listed"));
        }
        if self.game_fraction > 0.0 && self.kinds_in(Domain::Game).is_empty() {
            return Err(ConfigError::new("event_kinds", "game passages requested but no game kinds enabled"));
        }
        if self.game_fraction < 1.0 && self.kinds_in(Domain::History).is_empty() {
            return Err(ConfigError::new("event_kinds", "history passages requested but no history kinds enabled"));
        }
        if self.value_min < 1 || self.value_max > 80 || self.value_max - self.value_min + 1 < self.max_events as i64 {
            return Err(ConfigError::new("value_min", "values must lie in [1, 80] with room for distinct values"));
        }
        if self.year_min < 1400 || self.year_max > 2015 || self.year_max - self.year_min + 1 < self.max_events as i32 {
            return Err(ConfigError::new("year_min", "years must lie in [1400, 2015] with room for distinct years"));
        }
        if self.questions_per_passage == 0 || self.questions_per_passage > 40 {
            return Err(ConfigError::new("questions_per_passage", "must lie in 1..=40"));
        }
        let w = self.mix.values();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::new("mix", "weights must be nonnegative with a positive total"));
        }
        Ok(())
    }

    /// Sets one field from its flat `key=value` form. Mix weights use
    /// `mix.<family>`; `event_kinds` takes a comma-separated list; `preset`
    /// accepts `default` or `min-max-count`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "preset" => match v {
                "default" => *self = GenConfig::default(),
                "min-max-count" => *self = GenConfig::min_max_count(),
                _ => return Err(ConfigError::new(key, format!("unknown preset `{v}`"))),
            },
            "game_fraction" => self.game_fraction = parse_num(key, v)?,
            "min_events" => self.min_events = parse_num(key, v)?,
            "max_events" => self.max_events = parse_num(key, v)?,
            "value_min" => self.value_min = parse_num(key, v)?,
            "value_max" => self.value_max = parse_num(key, v)?,
            "year_min" => self.year_min = parse_num(key, v)?,
            "year_max" => self.year_max = parse_num(key, v)?,
            "distractor_rate" => self.distractor_rate = parse_num(key, v)?,
            "month_rate" => self.month_rate = parse_num(key, v)?,
            "synonym_rate" => self.synonym_rate = parse_num(key, v)?,
            "min_rate" => self.min_rate = parse_num(key, v)?,
            "questions_per_passage" => self.questions_per_passage = parse_num(key, v)?,
            "train_fraction" => self.train_fraction = parse_num(key, v)?,
            "dev_fraction" => self.dev_fraction = parse_num(key, v)?,
            "event_kinds" => {
                let mut kinds = Vec::new();
                for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    kinds.push(
                        EventKind::from_name(name)
                            .ok_or_else(|| ConfigError::new(key, format!("unknown event kind `{name}`")))?,
                    );
                }
                self.event_kinds = kinds;
            }
            _ => {
                let family = key
                    .strip_prefix("mix.")
                    .ok_or_else(|| ConfigError::new(key, "unknown key"))?;
                let slot = self
                    .mix
                    .fields_mut()
                    .into_iter()
                    .find(|(name, _)| *name == family)
                    .map(|(_, slot)| slot)
                    .ok_or_else(|| ConfigError::new(key, "unknown question family"))?;
                *slot = parse_num(key, v)?;
            }
        }
        Ok(())
    }

    /// Every key accepted by [`apply`](Self::apply).
    pub fn keys() -> Vec<String> {
        let mut keys: Vec<String> = [
            "preset",
            "game_fraction",
            "min_events",
            "max_events",
            "event_kinds",
            "value_min",
            "value_max",
            "year_min",
            "year_max",
            "distractor_rate",
            "month_rate",
            "synonym_rate",
            "min_rate",
            "questions_per_passage",
            "train_fraction",
            "dev_fraction",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut mix = QuestionMix::default();
        keys.extend(mix.fields_mut().iter().map(|(n, _)| format!("mix.{n}")));
        keys
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        GenConfig::default().validate().unwrap();
        GenConfig::min_max_count().validate().unwrap();
    }

    #[test]
    fn zero_kinds_rejected() {
        let c = GenConfig { event_kinds: Vec::new(), ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn ranges_checked() {
        for (k, v) in [("min_events", "3"), ("max_events", "13"), ("value_max", "81"), ("year_min", "1399")] {
            let mut c = GenConfig::default();
            c.apply(k, v).unwrap();
            assert!(c.validate().is_err(), "{k}={v}");
        }
    }

    #[test]
    fn apply_keys() {
        let mut c = GenConfig::default();
        c.apply("mix.count", "3.5").unwrap();
        c.apply("event_kinds", "field-goal, touchdown-pass, battle").unwrap();
        assert_eq!(c.mix.count, 3.5);
        assert_eq!(c.event_kinds.len(), 3);
        assert!(c.apply("bogus", "1").is_err());
        assert!(c.apply("mix.bogus", "1").is_err());
        for k in GenConfig::keys() {
            let probe = if k == "preset" { "default" } else if k == "event_kinds" { "battle,treaty,siege" } else { "1" };
            GenConfig::default().apply(&k, probe).unwrap();
        }
    }
}
