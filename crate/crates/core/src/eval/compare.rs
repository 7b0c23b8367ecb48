use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub stdev: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> MeanStd {
        if xs.is_empty() {
            return MeanStd::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stdev = if xs.len() < 2 { 0.0 } else { libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)) };
        MeanStd { mean, stdev }
    }
}

/// Second run minus first run, for one seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedDelta {
    pub seed: u64,
    pub em: f64,
    pub f1: f64,
    pub faithfulness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub split: String,
    pub deltas: Vec<SeedDelta>,
    pub em: MeanStd,
    pub f1: MeanStd,
    pub faithfulness: MeanStd,
    pub baseline_f1: MeanStd,
    pub treatment_f1: MeanStd,
}

/// Per-seed deltas `b - a` with their mean and standard deviation.
pub fn compare_runs(a: &[EvalReport], b: &[EvalReport], seeds: &[u64]) -> Result<Comparison, EvalError> {
    if a.len() != b.len() || a.len() != seeds.len() {
        return Err(EvalError::LengthMismatch { predictions: b.len(), golds: a.len() });
    }
    let split = a.first().or(b.first()).map(|r| r.split.clone()).unwrap_or_default();
    for r in a.iter().chain(b) {
        if r.split != split {
            return Err(EvalError::SplitMismatch { a: split, b: r.split.clone() });
        }
    }
    let deltas: Vec<SeedDelta> = a
        .iter()
        .zip(b)
        .zip(seeds)
        .map(|((x, y), &seed)| SeedDelta {
            seed,
            em: y.em - x.em,
            f1: y.f1 - x.f1,
            faithfulness: y.faithfulness.overall - x.faithfulness.overall,
        })
        .collect();
    let col = |f: fn(&SeedDelta) -> f64| MeanStd::of(&deltas.iter().map(f).collect::<Vec<_>>());
    Ok(Comparison {
        split,
        em: col(|d| d.em),
        f1: col(|d| d.f1),
        faithfulness: col(|d| d.faithfulness),
        baseline_f1: MeanStd::of(&a.iter().map(|r| r.f1).collect::<Vec<_>>()),
        treatment_f1: MeanStd::of(&b.iter().map(|r| r.f1).collect::<Vec<_>>()),
        deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::FaithfulnessReport;
    use alloc::collections::BTreeMap;

    fn run(split: &str, f1: f64) -> EvalReport {
        EvalReport {
            split: String::from(split),
            em: f1 / 2.0,
            f1,
            faithfulness: FaithfulnessReport { overall: 1.0 - f1, ..Default::default() },
            n_examples: 10,
            per_root: BTreeMap::new(),
        }
    }

    #[test]
    fn identical_runs() {
        let a = [run("dev", 0.5), run("dev", 0.6)];
        let c = compare_runs(&a, &a, &[1, 2]).unwrap();
        assert!(c.deltas.iter().all(|d| d.f1 == 0.0 && d.em == 0.0 && d.faithfulness == 0.0));
        assert_eq!(c.f1, MeanStd { mean: 0.0, stdev: 0.0 });
    }

    #[test]
    fn three_seeds() {
        let a = [run("test", 0.1), run("test", 0.2), run("test", 0.3)];
        let b = [run("test", 0.2), run("test", 0.4), run("test", 0.6)];
        let c = compare_runs(&a, &b, &[0, 1, 2]).unwrap();
        // Deltas 0.1, 0.2, 0.3.
        assert!((c.f1.mean - 0.2).abs() < 1e-12);
        assert!((c.f1.stdev - 0.1).abs() < 1e-12);
        assert!((c.treatment_f1.mean - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mismatched_splits() {
        let r = compare_runs(&[run("dev", 0.1)], &[run("test", 0.1)], &[0]);
        assert!(matches!(r, Err(EvalError::SplitMismatch { .. })));
    }
}
