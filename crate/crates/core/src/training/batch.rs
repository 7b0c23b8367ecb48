use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{DanglingPairError, TrainSet};
use crate::dsl::NodePath;
use crate::pairing::{PairLink, PairSource};
use crate::rng;
use crate::world::{QAExample, WorldInstance};

/// Position of an example inside a list of passages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExampleRef {
    pub world: usize,
    pub question: usize,
}

impl ExampleRef {
    pub fn get<'a>(&self, worlds: &'a [WorldInstance]) -> (&'a WorldInstance, &'a QAExample) {
        let w = &worlds[self.world];
        (w, &w.questions[self.question])
    }
}

/// A link with both ends resolved to examples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedLink {
    pub a: ExampleRef,
    pub path_a: NodePath,
    pub b: ExampleRef,
    pub path_b: NodePath,
}

/// Resolves the links whose source is enabled and whose ends may take part
/// in training: training questions, or probes and constructed questions on a
/// passage that has training questions. Other links are skipped.
pub fn resolve_links(set: &TrainSet<'_>, links: &[PairLink], sources: &BTreeSet<PairSource>) -> Result<Vec<ResolvedLink>, DanglingPairError> {
    let mut by_id: BTreeMap<&str, ExampleRef> = BTreeMap::new();
    for (wi, w) in set.worlds.iter().enumerate() {
        for (qi, q) in w.questions.iter().enumerate() {
            by_id.insert(&q.id, ExampleRef { world: wi, question: qi });
        }
    }
    let train: BTreeSet<ExampleRef> = set.train.iter().copied().collect();
    let train_worlds: BTreeSet<usize> = set.train.iter().map(|r| r.world).collect();
    let usable = |r: ExampleRef| {
        let q = &set.worlds[r.world].questions[r.question];
        train.contains(&r) || ((q.is_probe || q.augmented) && train_worlds.contains(&r.world))
    };
    let mut out = Vec::new();
    for (line, l) in links.iter().enumerate() {
        let lookup = |id: &String| by_id.get(id.as_str()).copied().ok_or_else(|| DanglingPairError { line, id: id.clone() });
        let (a, b) = (lookup(&l.example_a)?, lookup(&l.example_b)?);
        if !sources.contains(&l.source) || a == b || !usable(a) || !usable(b) {
            continue;
        }
        out.push(ResolvedLink { a, path_a: l.path_a.clone(), b, path_b: l.path_b.clone() });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub examples: Vec<ExampleRef>,
    /// Indices into the resolved link list.
    pub links: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub batches: Vec<Batch>,
    /// Links that found no batch holding both ends; they go first next epoch.
    pub deferred: Vec<usize>,
}

/// Packs one epoch.
///
/// Links are visited in order: `carry` first, then the rest shuffled. A link
/// joins the batch already holding one of its ends if the other end fits
/// there, or opens space for both ends in the newest batch. A link whose ends
/// sit in different batches, or that does not fit, is deferred. Remaining
/// training examples then fill the batches in shuffled order, and the batch
/// order is shuffled.
pub fn schedule_epoch(train: &[ExampleRef], links: &[ResolvedLink], carry: &[usize], batch_size: usize, seed: u64, epoch: u64) -> Schedule {
    let mut r = rng::rng(rng::mix(rng::stream(seed, "batches"), epoch));
    let carried: BTreeSet<usize> = carry.iter().copied().collect();
    let mut rest: Vec<usize> = (0..links.len()).filter(|i| !carried.contains(i)).collect();
    rest.shuffle(&mut r);
    let mut examples: Vec<ExampleRef> = train.to_vec();
    examples.shuffle(&mut r);

    let mut batches: Vec<Batch> = Vec::new();
    let mut home: BTreeMap<ExampleRef, usize> = BTreeMap::new();
    let mut deferred = Vec::new();
    for li in carry.iter().copied().chain(rest) {
        let l = &links[li];
        let placed = match (home.get(&l.a).copied(), home.get(&l.b).copied()) {
            (Some(x), Some(y)) => (x == y).then_some(x),
            (Some(x), None) | (None, Some(x)) => {
                let other = if home.contains_key(&l.a) { l.b } else { l.a };
                (batches[x].examples.len() < batch_size).then(|| {
                    batches[x].examples.push(other);
                    home.insert(other, x);
                    x
                })
            }
            (None, None) => {
                if batches.last().is_none_or(|b| b.examples.len() + 2 > batch_size) {
                    batches.push(Batch::default());
                }
                let x = batches.len() - 1;
                for e in [l.a, l.b] {
                    batches[x].examples.push(e);
                    home.insert(e, x);
                }
                Some(x)
            }
        };
        match placed {
            Some(x) => batches[x].links.push(li),
            None => deferred.push(li),
        }
    }
    let mut open = 0;
    for e in examples {
        if home.contains_key(&e) {
            continue;
        }
        while open < batches.len() && batches[open].examples.len() >= batch_size {
            open += 1;
        }
        if open == batches.len() {
            batches.push(Batch::default());
        }
        batches[open].examples.push(e);
        home.insert(e, open);
    }
    batches.shuffle(&mut r);
    Schedule { batches, deferred }
}

/// The first epoch's schedule for `links` over the training examples of `set`.
pub fn build_batches(set: &TrainSet<'_>, links: &[PairLink], batch_size: usize, seed: u64) -> Result<Schedule, DanglingPairError> {
    let sources = PairSource::ALL.into_iter().collect();
    let resolved = resolve_links(set, links, &sources)?;
    Ok(schedule_epoch(&set.train, &resolved, &[], batch_size, seed, 0))
}
