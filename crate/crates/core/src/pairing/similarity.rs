use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::world::{Lexicon, WorldInstance};

/// Default equivalence threshold on the matching F1.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVerdict {
    pub score: f64,
    pub entity_match: bool,
    pub equivalent: bool,
}

/// Character-trigram counts of the lowercased token with boundary markers.
fn trigrams(token: &str) -> BTreeMap<[char; 3], f64> {
    let chars: Vec<char> = core::iter::once('^').chain(token.to_lowercase().chars()).chain(core::iter::once('$')).collect();
    let mut out = BTreeMap::new();
    for w in chars.windows(3) {
        *out.entry([w[0], w[1], w[2]]).or_insert(0.0) += 1.0;
    }
    out
}

/// Cosine of the two tokens' trigram profiles.
fn static_cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (trigrams(a), trigrams(b));
    let dot: f64 = x.iter().filter_map(|(k, v)| y.get(k).map(|w| v * w)).sum();
    let norm = |m: &BTreeMap<[char; 3], f64>| libm::sqrt(m.values().map(|v| v * v).sum::<f64>());
    let (nx, ny) = (norm(&x), norm(&y));
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    dot / (nx * ny)
}

/// Match weight of two tokens: 1 for identical or synonym tokens, else the
/// cosine of their character-trigram profiles.
pub fn token_similarity(a: &str, b: &str, lexicon: &Lexicon) -> f64 {
    if lexicon.synonymous(a, b) {
        return 1.0;
    }
    static_cosine(a, b).clamp(0.0, 1.0)
}

fn is_entity(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

fn entities(tokens: &[String]) -> BTreeSet<&str> {
    tokens.iter().filter(|t| is_entity(t)).map(String::as_str).collect()
}

/// Greedy token-matching F1 between two argument phrases, plus an exact
/// entity check on capitalized tokens.
pub fn arg_similarity(a: &[String], b: &[String], lexicon: &Lexicon) -> SimilarityVerdict {
    arg_similarity_with(a, b, lexicon, DEFAULT_THRESHOLD)
}

pub fn arg_similarity_with(a: &[String], b: &[String], lexicon: &Lexicon, threshold: f64) -> SimilarityVerdict {
    weighted_similarity(a, b, lexicon, threshold, |_| 1.0)
}

fn weighted_similarity(a: &[String], b: &[String], lexicon: &Lexicon, threshold: f64, weight: impl Fn(&str) -> f64) -> SimilarityVerdict {
    let entity_match = entities(a) == entities(b);
    if a.is_empty() || b.is_empty() {
        return SimilarityVerdict { score: 0.0, entity_match, equivalent: false };
    }
    let sims: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| token_similarity(x, y, lexicon)).collect()).collect();
    let side = |tokens: &[String], best: &dyn Fn(usize) -> f64| {
        let (num, den) = tokens.iter().enumerate().fold((0.0, 0.0), |(n, d), (i, t)| {
            let w = weight(t);
            (n + w * best(i), d + w)
        });
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let recall = side(a, &|i| sims[i].iter().copied().fold(0.0, f64::max));
    let precision = side(b, &|j| sims.iter().map(|row| row[j]).fold(0.0, f64::max));
    let score = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    SimilarityVerdict { score, entity_match, equivalent: score >= threshold && entity_match }
}

/// Argument matcher with per-token importance weights.
///
/// Weights are smoothed inverse document frequencies over a corpus of `find`
/// arguments, so tokens shared by most arguments (`touchdown`) count less
/// than the ones that tell arguments apart (`pass`, `run`). Synonyms share
/// one frequency; unseen tokens get the largest weight.
#[derive(Clone, Debug, Default)]
pub struct Matcher {
    pub lexicon: Lexicon,
    pub threshold: f64,
    idf: BTreeMap<String, f64>,
    unseen: f64,
}

impl Matcher {
    /// Uniform weights; equivalent to [`arg_similarity_with`].
    pub fn uniform(threshold: f64) -> Self {
        Matcher { lexicon: Lexicon::standard(), threshold, idf: BTreeMap::new(), unseen: 1.0 }
    }

    pub fn from_args<'a>(args: impl IntoIterator<Item = &'a [String]>, threshold: f64) -> Self {
        let lexicon = Lexicon::standard();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n = 0usize;
        for arg in args {
            n += 1;
            let uniq: BTreeSet<String> = arg.iter().map(|t| lexicon.canonical(t)).collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let idf_of = |d: usize| libm::log((1.0 + n as f64) / (1.0 + d as f64));
        let idf = df.into_iter().map(|(t, d)| (t, idf_of(d))).collect();
        Matcher { lexicon, threshold, idf, unseen: idf_of(0) }
    }

    /// Weights from every `find` argument of the given passages' questions.
    pub fn from_worlds(worlds: &[WorldInstance], threshold: f64) -> Self {
        let examples = worlds.iter().flat_map(|w| w.questions.iter()).filter(|q| !q.is_probe);
        let args: Vec<Vec<String>> = examples.flat_map(|q| super::find_leaves(q).into_iter().map(|(_, a)| a)).collect();
        Matcher::from_args(args.iter().map(Vec::as_slice), threshold)
    }

    pub fn weight(&self, token: &str) -> f64 {
        if self.idf.is_empty() {
            return 1.0;
        }
        self.idf.get(&self.lexicon.canonical(token)).copied().unwrap_or(self.unseen)
    }

    /// Capitalized tokens are already compared exactly by the entity check,
    /// so they only enter the score when a side has nothing else.
    pub fn similarity(&self, a: &[String], b: &[String]) -> SimilarityVerdict {
        let plain = |ts: &[String]| ts.iter().any(|t| !is_entity(t));
        if plain(a) && plain(b) {
            weighted_similarity(a, b, &self.lexicon, self.threshold, |t| if is_entity(t) { 0.0 } else { self.weight(t) })
        } else {
            weighted_similarity(a, b, &self.lexicon, self.threshold, |t| self.weight(t))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::tokenize;

    fn sim(a: &str, b: &str) -> SimilarityVerdict {
        arg_similarity(&tokenize(a), &tokenize(b), &Lexicon::standard())
    }

    #[test]
    fn synonyms_are_equivalent() {
        assert!(sim("passing touchdowns", "touchdown passes").equivalent);
        let v = sim("field goals", "field goals");
        assert_eq!(v.score, 1.0);
        assert!(v.equivalent);
    }

    #[test]
    fn entities_block_equivalence() {
        let v = sim("Jay Feely's field goal", "Janikowski's field goal");
        assert!(v.score >= DEFAULT_THRESHOLD, "{}", v.score);
        assert!(!v.entity_match);
        assert!(!v.equivalent);
        assert!(!sim("Battle of Dunbar", "Battle of Breda").equivalent);
    }

    #[test]
    fn weighting_separates_subkinds() {
        let args: Vec<Vec<String>> = ["touchdowns", "touchdown passes", "touchdown runs", "touchdown pass", "field goals", "touchdown"]
            .iter()
            .map(|s| tokenize(s))
            .collect();
        let m = Matcher::from_args(args.iter().map(Vec::as_slice), DEFAULT_THRESHOLD);
        assert!(m.weight("touchdown") < m.weight("passes"));
        let eq = |a: &str, b: &str| m.similarity(&tokenize(a), &tokenize(b)).equivalent;
        assert!(!eq("touchdown", "touchdown pass"));
        assert!(!eq("touchdowns", "touchdown passes"));
        assert!(eq("passing touchdowns", "touchdown passes"));
        assert!(eq("field goal", "field goals"));
        assert!(!eq("Adams 's field goal", "Adams 's touchdown pass"));
        assert!(eq("Adams 's touchdown pass", "Adams 's passing touchdown"));
        assert!(eq("Battle of Breda", "Battle of Breda"));
        let uniform = Matcher::uniform(DEFAULT_THRESHOLD);
        let (a, b) = (tokenize("touchdown"), tokenize("touchdown pass"));
        assert_eq!(uniform.similarity(&a, &b), arg_similarity(&a, &b, &Lexicon::standard()));
    }

    #[test]
    fn unrelated_kinds_differ() {
        assert!(!sim("touchdown runs", "touchdown passes").equivalent);
        assert!(!sim("field goals", "touchdown runs").equivalent);
    }
}
