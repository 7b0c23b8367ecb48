//! Dataset-level pair acquisition and split selection.

use std::collections::BTreeSet;

use crate::CliError;
use modpair_core::eval::CompSplit;
use modpair_core::pairing::{find_natural_pairs, generate_probe_pairs, template_pairs_for_world, FamilySet, Matcher, PairLink, WorldPairs};
use modpair_core::world::{Dataset, Lexicon, QAExample, WorldInstance};

/// Found links over every passage, in passage order.
pub fn find_pairs(worlds: &[WorldInstance], threshold: f64) -> Vec<PairLink> {
    let matcher = Matcher::from_worlds(worlds, threshold);
    worlds.iter().flat_map(|w| find_natural_pairs(w, &matcher)).collect()
}

fn append(worlds: &mut [WorldInstance], per_world: Vec<WorldPairs>) -> Result<Vec<PairLink>, CliError> {
    let mut links = Vec::new();
    for (w, pairs) in worlds.iter_mut().zip(per_world) {
        for ex in &pairs.examples {
            if w.question(&ex.id).is_some() {
                return Err(CliError::invalid(format!("passage {} already holds example `{}`", w.id, ex.id)));
            }
        }
        w.questions.extend(pairs.examples);
        links.extend(pairs.links);
    }
    Ok(links)
}

/// Appends template probes to `worlds` and returns their links.
pub fn make_pairs(worlds: &mut [WorldInstance], families: &FamilySet) -> Result<Vec<PairLink>, CliError> {
    let lexicon = Lexicon::standard();
    let per_world = worlds.iter().map(|w| template_pairs_for_world(w, &lexicon, families)).collect();
    append(worlds, per_world)
}

/// Appends generated number/date probes to `worlds` and returns their links.
pub fn gen_probes(worlds: &mut [WorldInstance], seed: u64, k: usize, threshold: f64) -> Result<Vec<PairLink>, CliError> {
    let matcher = Matcher::from_worlds(worlds, threshold);
    let per_world = worlds.iter().map(|w| generate_probe_pairs(w, seed, k, &matcher)).collect();
    append(worlds, per_world)
}

/// Examples of a named split: passage splits from the dataset manifest, or
/// question-id splits (`train`, `dev`, `held-out`) from a compositional split.
pub fn split_examples<'a>(dataset: &'a Dataset, split: &str, comp: Option<&CompSplit>) -> Result<Vec<(&'a WorldInstance, &'a QAExample)>, CliError> {
    match comp {
        None => {
            let ids: BTreeSet<&str> = dataset
                .manifest
                .ids(split)
                .ok_or_else(|| CliError::invalid(format!("unknown split `{split}` (expected train, dev or test)")))?
                .iter()
                .map(String::as_str)
                .collect();
            Ok(dataset.worlds.iter().filter(|w| ids.contains(w.id.as_str())).flat_map(|w| w.questions.iter().map(move |q| (w, q))).collect())
        }
        Some(c) => {
            let list = match split {
                "train" => &c.train,
                "dev" => &c.dev,
                "held-out" => &c.held_out,
                _ => return Err(CliError::invalid(format!("unknown split `{split}` (expected train, dev or held-out)"))),
            };
            let ids: BTreeSet<&str> = list.iter().map(String::as_str).collect();
            let items: Vec<_> = dataset.worlds.iter().flat_map(|w| w.questions.iter().map(move |q| (w, q))).filter(|(_, q)| ids.contains(q.id.as_str())).collect();
            if items.len() != ids.len() {
                return Err(CliError::invalid(format!("{} of the split's {} question ids are not in the dataset", ids.len() - items.len(), ids.len())));
            }
            Ok(items)
        }
    }
}
