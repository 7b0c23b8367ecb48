//! Batched training on answer likelihood plus the paired objective.
//!
//! Both ends of a link are executed in the same optimizer step, so the
//! symmetric KL between their shared subtrees' denotations is differentiated
//! into both examples at once. With `lambda_paired = 0` links are not read at
//! all and the run is the answer-only baseline.

mod batch;
mod config;
mod loss;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, Matrix, Var};
use crate::dsl::{NodePath, ValueType};
use crate::eval::{evaluate, EvalError};
use crate::executor::{answer_loss, ExecError, ExecOptions, Model, Trace, WorldIndex};
use crate::pairing::PairLink;
use crate::world::{ConfigError, SplitManifest, WorldInstance};

pub use batch::{build_batches, resolve_links, schedule_epoch, Batch, ExampleRef, ResolvedLink, Schedule};
pub use config::TrainConfig;
pub use loss::paired_loss;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("pair {line}: unknown example `{id}`")]
pub struct DanglingPairError {
    pub line: usize,
    pub id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    DanglingPair(#[from] DanglingPairError),
    #[error("paired nodes disagree in kind: {a} vs {b}")]
    KindMismatch { a: ValueType, b: ValueType },
    #[error("trace has no node at {0}")]
    MissingNode(NodePath),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: answer {answer_loss}, paired {paired_loss}; examples {examples:?}")]
    NonFinite { epoch: usize, batch: usize, answer_loss: f64, paired_loss: f64, examples: Vec<String> },
}

/// Passages with the examples that carry answer loss and those used for
/// model selection.
#[derive(Clone, Debug)]
pub struct TrainSet<'a> {
    pub worlds: &'a [WorldInstance],
    pub train: Vec<ExampleRef>,
    pub dev: Vec<ExampleRef>,
}

fn answerable(worlds: &[WorldInstance], pick: impl Fn(&WorldInstance, &crate::world::QAExample) -> bool) -> Vec<ExampleRef> {
    let mut out = Vec::new();
    for (wi, w) in worlds.iter().enumerate() {
        for (qi, q) in w.questions.iter().enumerate() {
            if q.is_labeled() && !q.augmented && pick(w, q) {
                out.push(ExampleRef { world: wi, question: qi });
            }
        }
    }
    out
}

impl<'a> TrainSet<'a> {
    /// Labeled questions of the manifest's train and dev passages.
    pub fn from_manifest(worlds: &'a [WorldInstance], manifest: &SplitManifest) -> Self {
        let ids = |v: &Vec<String>| v.iter().cloned().collect::<BTreeSet<_>>();
        let (train, dev) = (ids(&manifest.train), ids(&manifest.dev));
        TrainSet {
            worlds,
            train: answerable(worlds, |w, _| train.contains(&w.id)),
            dev: answerable(worlds, |w, _| dev.contains(&w.id)),
        }
    }

    /// Labeled questions selected by id.
    pub fn from_ids(worlds: &'a [WorldInstance], train: &BTreeSet<&str>, dev: &BTreeSet<&str>) -> Self {
        TrainSet {
            worlds,
            train: answerable(worlds, |_, q| train.contains(q.id.as_str())),
            dev: answerable(worlds, |_, q| dev.contains(q.id.as_str())),
        }
    }
}

/// One epoch's summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean answer loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean paired loss over the epoch's batches that held links.
    pub paired_loss: f64,
    pub dev_f1: f64,
    pub dev_em: f64,
    pub n_pairs: usize,
    pub tau: f64,
    pub grad_norm: f64,
}

/// Losses of one optimizer step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainStepReport {
    pub answer_loss: f64,
    pub paired_loss: f64,
    pub n_pairs: usize,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochMetrics>,
    /// Epoch whose parameters the model holds after training.
    pub best_epoch: usize,
    /// Temperature the kept parameters were trained at.
    pub tau: f64,
    /// Labeled examples whose answer falls outside the model's support.
    pub unscorable: usize,
}

fn mean_of(g: &mut Graph, terms: &[Var]) -> Result<Option<Var>, AutodiffError> {
    let Some((&first, rest)) = terms.split_first() else { return Ok(None) };
    let mut acc = first;
    for &t in rest {
        acc = g.add(acc, t)?;
    }
    Ok(Some(g.scale(acc, 1.0 / terms.len() as f64)))
}

struct Stepper<'a> {
    set: &'a TrainSet<'a>,
    links: &'a [ResolvedLink],
    indexes: Vec<WorldIndex>,
    train: BTreeSet<ExampleRef>,
    config: &'a TrainConfig,
}

impl Stepper<'_> {
    /// Forward, backward and one optimizer update over `batch`.
    fn step(&self, model: &mut Model, batch: &Batch, tau: f64, progress: f64, epoch: usize, bi: usize, unscorable: &mut BTreeSet<ExampleRef>) -> Result<Option<TrainStepReport>, TrainError> {
        let mut g = Graph::new();
        let opts = ExecOptions { tau };
        let mut traces: BTreeMap<ExampleRef, Trace> = BTreeMap::new();
        let mut answers = Vec::new();
        for &r in &batch.examples {
            let (w, q) = r.get(self.set.worlds);
            let trace = model.execute(&mut g, q, w, &self.indexes[r.world], &opts)?;
            if self.train.contains(&r) {
                let gold = q.answer.as_ref().expect("training examples are labeled");
                match answer_loss(&mut g, &trace, gold) {
                    Ok(v) => answers.push(v),
                    Err(ExecError::KindMismatch { .. }) => {
                        unscorable.insert(r);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            traces.insert(r, trace);
        }
        let mut paired = Vec::new();
        for &li in &batch.links {
            let l = &self.links[li];
            paired.push(paired_loss(&mut g, &traces[&l.a], &l.path_a, &traces[&l.b], &l.path_b, self.config.eps_kl)?);
        }
        let answer = mean_of(&mut g, &answers)?;
        let pair = mean_of(&mut g, &paired)?;
        let value = |g: &Graph, v: Option<Var>| v.map_or(0.0, |v| g.value(v).item());
        let (answer_value, paired_value) = (value(&g, answer), value(&g, pair));
        if !(answer_value.is_finite() && paired_value.is_finite()) {
            return Err(TrainError::NonFinite {
                epoch,
                batch: bi,
                answer_loss: answer_value,
                paired_loss: paired_value,
                examples: batch.examples.iter().map(|r| r.get(self.set.worlds).1.id.clone()).collect(),
            });
        }
        let total = match (answer, pair) {
            (Some(a), Some(p)) => {
                let p = g.scale(p, self.config.lambda_paired);
                g.add(a, p).map_err(AutodiffError::from)?
            }
            (Some(a), None) => a,
            (None, Some(p)) => g.scale(p, self.config.lambda_paired),
            (None, None) => return Ok(None),
        };
        g.backward(total)?;
        model.params.accumulate(&g);
        let grad_norm = model.params.adam_step(&self.config.adam(progress))?;
        Ok(Some(TrainStepReport { answer_loss: answer_value, paired_loss: paired_value, n_pairs: batch.links.len(), grad_norm }))
    }
}

/// Trains `model` in place; see [`train_with`].
pub fn train(model: &mut Model, set: &TrainSet<'_>, links: &[PairLink], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with(model, set, links, config, |_| {})
}

/// Trains `model` in place, calling `on_epoch` after every epoch.
///
/// The temperature anneals linearly over the configured epochs. After each
/// epoch the dev set is scored; training stops after `patience` epochs
/// without a dev F1 improvement and the best epoch's parameters are kept.
/// With an empty dev set every epoch runs and the final parameters are kept.
pub fn train_with(
    model: &mut Model,
    set: &TrainSet<'_>,
    links: &[PairLink],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let resolved = if config.lambda_paired > 0.0 { resolve_links(set, links, &config.pair_sources)? } else { Vec::new() };
    let stepper = Stepper {
        set,
        links: &resolved,
        indexes: set.worlds.iter().map(WorldIndex::new).collect(),
        train: set.train.iter().copied().collect(),
        config,
    };
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, f64, BTreeMap<String, Matrix>)> = None;
    let mut carry = Vec::new();
    let mut unscorable = BTreeSet::new();
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let progress = if config.epochs > 1 { epoch as f64 / (config.epochs - 1) as f64 } else { 1.0 };
        let tau = model.config.tau_at(progress);
        let schedule = schedule_epoch(&set.train, &resolved, &carry, config.batch_size, config.seed, epoch as u64);
        carry = schedule.deferred;
        let (mut answer_sum, mut answer_n, mut pair_sum, mut pair_n, mut norm_sum, mut n_pairs) = (0.0, 0usize, 0.0, 0usize, 0.0, 0usize);
        let n_batches = schedule.batches.len().max(1) as f64;
        for (bi, batch) in schedule.batches.iter().enumerate() {
            let step_progress = (epoch as f64 + bi as f64 / n_batches) / config.epochs as f64;
            let Some(report) = stepper.step(model, batch, tau, step_progress, epoch, bi, &mut unscorable)? else { continue };
            answer_sum += report.answer_loss;
            answer_n += 1;
            norm_sum += report.grad_norm;
            if report.n_pairs > 0 {
                pair_sum += report.paired_loss;
                pair_n += 1;
                n_pairs += report.n_pairs;
            }
        }
        let dev = evaluate(model, set.dev.iter().map(|r| r.get(set.worlds)), "dev", tau)?;
        let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        let metrics = EpochMetrics {
            epoch,
            train_loss: avg(answer_sum, answer_n),
            paired_loss: avg(pair_sum, pair_n),
            dev_f1: dev.f1,
            dev_em: dev.em,
            n_pairs,
            tau,
            grad_norm: avg(norm_sum, answer_n),
        };
        on_epoch(&metrics);
        history.push(metrics);
        // Without dev examples every epoch counts as an improvement, so the
        // last parameters are kept.
        if set.dev.is_empty() || best.as_ref().is_none_or(|b| dev.f1 > b.0) {
            best = Some((dev.f1, epoch, tau, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    let (best_epoch, tau) = match best {
        Some((_, epoch, tau, values)) => {
            model.load_values(&values)?;
            (epoch, tau)
        }
        None => (0, model.config.tau_start),
    };
    Ok(TrainOutcome { history, best_epoch, tau, unscorable: unscorable.len() })
}

/// Parameter values by name.
pub fn snapshot(model: &Model) -> BTreeMap<String, Matrix> {
    model.params.ids().map(|id| (String::from(model.params.name(id)), model.params.value(id).clone())).collect()
}
