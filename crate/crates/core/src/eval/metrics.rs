use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::world::GoldAnswer;

/// An answer in the form it is scored: a number, or the answer text's tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    Value(i64),
    Tokens(Vec<String>),
}

impl Answer {
    /// Resolves spans against the passage. Counts, numbers and years all
    /// score as plain values.
    pub fn resolve(answer: &GoldAnswer, passage: &[String]) -> Answer {
        match *answer {
            GoldAnswer::Count(c) => Answer::Value(i64::from(c)),
            GoldAnswer::Number(v) => Answer::Value(v),
            GoldAnswer::Year(y) => Answer::Value(i64::from(y)),
            GoldAnswer::Span(s) => {
                let end = s.end().min(passage.len());
                let start = s.start().min(end);
                Answer::Tokens(normalize(&passage[start..end]))
            }
        }
    }
}

fn normalize(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(|t| t.to_lowercase())
        .collect()
}

fn bag_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred == gold { 1.0 } else { 0.0 };
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Exact match and F1 of one prediction.
pub fn item_scores(pred: &Answer, gold: &Answer) -> (f64, f64) {
    let em = if pred == gold { 1.0 } else { 0.0 };
    let f1 = match (pred, gold) {
        (Answer::Tokens(p), Answer::Tokens(g)) => bag_f1(p, g),
        _ => em,
    };
    (em, f1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerMetrics {
    pub em: f64,
    pub f1: f64,
    pub n: usize,
}

pub fn answer_metrics(predictions: &[Answer], golds: &[Answer]) -> Result<AnswerMetrics, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), golds: golds.len() });
    }
    let n = golds.len();
    if n == 0 {
        return Ok(AnswerMetrics::default());
    }
    let (em, f1) = predictions.iter().zip(golds).fold((0.0, 0.0), |(e, f), (p, g)| {
        let (a, b) = item_scores(p, g);
        (e + a, f + b)
    });
    Ok(AnswerMetrics { em: em / n as f64, f1: f1 / n as f64, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{tokenize, Span};

    fn toks(s: &str) -> Answer {
        Answer::Tokens(tokenize(s))
    }

    #[test]
    fn perfect_predictions() {
        let g = [Answer::Value(3), toks("Smith"), Answer::Value(1998)];
        let m = answer_metrics(&g, &g).unwrap();
        assert_eq!((m.em, m.f1, m.n), (1.0, 1.0, 3));
    }

    #[test]
    fn half_overlapping_span() {
        let m = answer_metrics(&[toks("Jay")], &[toks("Jay Feely")]).unwrap();
        assert_eq!(m.em, 0.0);
        let expected = 2.0 * 1.0 * 0.5 / (1.0 + 0.5);
        assert!((m.f1 - expected).abs() < 1e-12);
        assert!((m.f1 - 0.666_667).abs() < 1e-6);
    }

    #[test]
    fn off_by_one_number() {
        let m = answer_metrics(&[Answer::Value(24)], &[Answer::Value(23)]).unwrap();
        assert_eq!((m.em, m.f1), (0.0, 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(answer_metrics(&[], &[Answer::Value(1)]), Err(EvalError::LengthMismatch { predictions: 0, golds: 1 })));
    }

    #[test]
    fn spans_score_by_text() {
        let passage = tokenize("Smith kicked a goal . Smith ran .");
        let a = Answer::resolve(&GoldAnswer::Span(Span(0, 1)), &passage);
        let b = Answer::resolve(&GoldAnswer::Span(Span(5, 6)), &passage);
        assert_eq!(a, b);
        assert_eq!(Answer::resolve(&GoldAnswer::Count(4), &passage), Answer::resolve(&GoldAnswer::Number(4), &passage));
    }
}
