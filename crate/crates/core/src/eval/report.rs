use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{faithfulness, item_scores, Answer, AnswerMetrics, EvalError, FaithfulnessReport, FaithfulnessTally, NodeScore};
use crate::autodiff::Graph;
use crate::executor::{decode, ExecOptions, Model, WorldIndex};
use crate::world::{GoldAnswer, QAExample, WorldInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub em: f64,
    pub f1: f64,
    pub faithfulness: FaithfulnessReport,
    pub n_examples: usize,
    /// Answer metrics per program root module, e.g. `count`.
    #[serde(default)]
    pub per_root: BTreeMap<String, AnswerMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub answer: GoldAnswer,
    pub nodes: Vec<NodeScore>,
}

/// Runs one example at temperature `tau` and decodes its answer.
pub fn predict(model: &Model, world: &WorldInstance, index: &WorldIndex, example: &QAExample, tau: f64) -> Result<Prediction, EvalError> {
    let mut g = Graph::new();
    let trace = model.execute(&mut g, example, world, index, &ExecOptions { tau })?;
    let answer = decode(&g, trace.root(), model.config.span_alpha);
    let nodes = faithfulness(&g, &trace, &example.program, &example.gold_module_outputs, index)?;
    Ok(Prediction { answer, nodes })
}

/// Answer metrics and faithfulness over the labeled examples among `items`.
pub fn evaluate<'a>(
    model: &Model,
    items: impl IntoIterator<Item = (&'a WorldInstance, &'a QAExample)>,
    split: &str,
    tau: f64,
) -> Result<EvalReport, EvalError> {
    let mut tally = FaithfulnessTally::default();
    let mut per_root: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    let mut cached: Option<(&str, WorldIndex)> = None;
    for (world, ex) in items {
        let Some(gold) = ex.answer.filter(|_| ex.is_labeled() && !ex.augmented) else { continue };
        if cached.as_ref().is_none_or(|(id, _)| *id != world.id) {
            cached = Some((&world.id, WorldIndex::new(world)));
        }
        let index = &cached.as_ref().expect("set above").1;
        let pred = predict(model, world, index, ex, tau)?;
        let (em, f1) = item_scores(&Answer::resolve(&pred.answer, &world.passage_tokens), &Answer::resolve(&gold, &world.passage_tokens));
        tally.add(&pred.nodes);
        let e = per_root.entry(String::from(ex.program.root.module.name())).or_default();
        e.0 += em;
        e.1 += f1;
        e.2 += 1;
    }
    let total = per_root.values().fold((0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let metrics = |(em, f1, n): (f64, f64, usize)| {
        if n == 0 {
            AnswerMetrics::default()
        } else {
            AnswerMetrics { em: em / n as f64, f1: f1 / n as f64, n }
        }
    };
    let overall = metrics(total);
    Ok(EvalReport {
        split: String::from(split),
        em: overall.em,
        f1: overall.f1,
        faithfulness: tally.report(),
        n_examples: overall.n,
        per_root: per_root.into_iter().map(|(k, v)| (k, metrics(v))).collect(),
    })
}
