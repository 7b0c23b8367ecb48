use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::autodiff::Graph;
use crate::dsl::{ModuleKind, NodePath, Program};
use crate::executor::{Support, Trace, WorldIndex};

pub const FAITHFULNESS_EPS: f64 = 1e-8;

/// `-ln(gold mass + eps)` for one node's distribution.
pub fn node_faithfulness(p: &[f64], gold: &[usize]) -> f64 {
    let set: BTreeSet<usize> = gold.iter().copied().collect();
    let mass: f64 = set.iter().filter_map(|&i| p.get(i)).sum();
    -libm::log(mass + FAITHFULNESS_EPS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub path: NodePath,
    pub module: String,
    pub score: f64,
}

/// Scores every annotated node of one executed example.
///
/// Number and date distributions are scored through the passage tokens
/// their support entries occupy.
pub fn faithfulness(
    g: &Graph,
    trace: &Trace,
    program: &Program,
    gold: &BTreeMap<NodePath, Vec<usize>>,
    index: &WorldIndex,
) -> Result<Vec<NodeScore>, EvalError> {
    let mut out = Vec::with_capacity(gold.len());
    for (path, tokens) in gold {
        let den = trace.get(path).ok_or_else(|| EvalError::MissingNode(path.clone()))?;
        let node = program.get(path).ok_or_else(|| EvalError::MissingNode(path.clone()))?;
        let p = g.value(den.var).data();
        let score = match &den.support {
            Support::Tokens(_) => node_faithfulness(p, tokens),
            Support::Numbers(_) => quantity_score(p, &index.number_tokens, tokens),
            Support::Dates(_) => quantity_score(p, &index.date_tokens, tokens),
            _ => continue,
        };
        out.push(NodeScore { path: path.clone(), module: String::from(node.module.name()), score });
    }
    Ok(out)
}

fn quantity_score(p: &[f64], positions: &[usize], gold: &[usize]) -> f64 {
    let hits: Vec<usize> = positions.iter().enumerate().filter(|(_, t)| gold.contains(t)).map(|(i, _)| i).collect();
    node_faithfulness(p, &hits)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub overall: f64,
    pub per_module: BTreeMap<String, f64>,
    /// Means over module groups: `num-date` (find-num, find-date) and
    /// `min-max` (find-max-num, find-min-num).
    #[serde(default)]
    pub grouped: BTreeMap<String, f64>,
    pub n_nodes: usize,
}

/// Running sums for a [`FaithfulnessReport`].
#[derive(Clone, Debug, Default)]
pub struct FaithfulnessTally {
    sums: BTreeMap<String, (f64, usize)>,
}

const GROUPS: [(&str, [ModuleKind; 2]); 2] = [
    ("num-date", [ModuleKind::FindNum, ModuleKind::FindDate]),
    ("min-max", [ModuleKind::FindMaxNum, ModuleKind::FindMinNum]),
];

impl FaithfulnessTally {
    pub fn add(&mut self, scores: &[NodeScore]) {
        for s in scores {
            let e = self.sums.entry(s.module.clone()).or_default();
            e.0 += s.score;
            e.1 += 1;
        }
    }

    pub fn report(&self) -> FaithfulnessReport {
        let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
        let total = self.sums.values().fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
        let per_module = self.sums.iter().map(|(k, v)| (k.clone(), mean(*v))).collect();
        let mut grouped = BTreeMap::new();
        for (name, kinds) in GROUPS {
            let sum = kinds.iter().filter_map(|k| self.sums.get(k.name())).fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
            if sum.1 > 0 {
                grouped.insert(String::from(name), mean(sum));
            }
        }
        FaithfulnessReport { overall: mean(total), per_module, grouped, n_nodes: total.1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn all_mass_in_gold() {
        assert!(node_faithfulness(&[0.0, 0.5, 0.5], &[1, 2]).abs() < 1e-7);
    }

    #[test]
    fn uniform_hundred_gold_ten() {
        let p = vec![0.01; 100];
        let gold: Vec<usize> = (0..10).collect();
        assert!((node_faithfulness(&p, &gold) - 2.302_585).abs() < 1e-6);
    }

    #[test]
    fn equal_events_one_gold() {
        for k in 2..6usize {
            // k events of two tokens each with equal mass; only the first is gold.
            let q = vec![0.5 / k as f64; 2 * k];
            assert!((node_faithfulness(&q, &[0, 1]) + libm::log(1.0 / k as f64 + FAITHFULNESS_EPS)).abs() < 1e-12);
            // Mass only on the first event while all events are gold costs nothing.
            let mut p = vec![0.0; 2 * k];
            p[0] = 0.5;
            p[1] = 0.5;
            let all: Vec<usize> = (0..2 * k).collect();
            assert!(node_faithfulness(&p, &all).abs() < 1e-7);
        }
    }

    #[test]
    fn moving_mass_to_gold_lowers_score() {
        let before = node_faithfulness(&[0.2, 0.3, 0.5], &[0]);
        let after = node_faithfulness(&[0.3, 0.2, 0.5], &[0]);
        assert!(after < before);
    }

    #[test]
    fn tally_groups() {
        let s = |m: &str, v: f64| NodeScore { path: NodePath::root(), module: String::from(m), score: v };
        let mut t = FaithfulnessTally::default();
        t.add(&[s("find", 1.0), s("find-num", 2.0), s("find-date", 4.0), s("find-max-num", 3.0)]);
        let r = t.report();
        assert_eq!(r.n_nodes, 4);
        assert!((r.overall - 2.5).abs() < 1e-12);
        assert!((r.grouped["num-date"] - 3.0).abs() < 1e-12);
        assert!((r.grouped["min-max"] - 3.0).abs() < 1e-12);
        assert_eq!(r.per_module["find"], 1.0);
    }
}
