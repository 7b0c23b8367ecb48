use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::{Denotation, ExecError, Support, Trace};
use crate::autodiff::{Graph, Var};
use crate::world::{GoldAnswer, Span};

const LOG_FLOOR: f64 = 1e-12;

fn mismatch(gold: &GoldAnswer, den: &Denotation) -> ExecError {
    ExecError::KindMismatch { gold: format!("{gold:?}"), found: den.kind }
}

/// Negative log of the root distribution's mass on the gold outcome. A span
/// of several tokens also pays the divergence of its within-span
/// distribution from uniform.
pub fn answer_loss(g: &mut Graph, trace: &Trace, gold: &GoldAnswer) -> Result<Var, ExecError> {
    let root = trace.root();
    let n = root.support.len();
    let hits: Vec<usize> = match (&root.support, gold) {
        (Support::Counts(len), GoldAnswer::Count(c)) if (*c as usize) < *len => alloc::vec![*c as usize],
        (Support::Numbers(vals), GoldAnswer::Number(v)) => positions(vals, *v),
        (Support::Dates(vals), GoldAnswer::Year(y)) => positions(vals, i64::from(*y)),
        (Support::Bins { lo, len }, GoldAnswer::Number(v)) if *v >= *lo && *v < *lo + *len as i64 => {
            alloc::vec![(*v - *lo) as usize]
        }
        (Support::Bins { lo, len }, GoldAnswer::Year(v)) => {
            let v = i64::from(*v);
            if v >= *lo && v < *lo + *len as i64 {
                alloc::vec![(v - *lo) as usize]
            } else {
                Vec::new()
            }
        }
        (Support::Tokens(len), GoldAnswer::Span(s)) if !s.is_empty() && s.end() <= *len => s.indices().collect(),
        _ => Vec::new(),
    };
    if hits.is_empty() || hits.iter().any(|&i| i >= n) {
        return Err(mismatch(gold, root));
    }
    let picked = g.gather(root.var, &hits, 1, hits.len())?;
    if matches!(gold, GoldAnswer::Span(_)) && hits.len() > 1 {
        // -log(mass) plus KL(uniform || P within the span): equal to
        // -mean log P_t - log k, so a decodable span needs even mass.
        let shifted = g.add_scalar(picked, LOG_FLOOR);
        let logs = g.log(shifted);
        let mean = g.mean(logs);
        let neg = g.neg(mean);
        return Ok(g.add_scalar(neg, -libm::log(hits.len() as f64)));
    }
    let mass = g.sum(picked);
    let mass = g.add_scalar(mass, LOG_FLOOR);
    let ll = g.log(mass);
    Ok(g.neg(ll))
}

fn positions(vals: &[i64], v: i64) -> Vec<usize> {
    vals.iter().enumerate().filter(|(_, &x)| x == v).map(|(i, _)| i).collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Maximal contiguous run around the most probable token whose tokens all
/// exceed `alpha · max`.
pub fn span_decode(p: &[f64], alpha: f64) -> Span {
    if p.is_empty() {
        return Span(0, 0);
    }
    let peak = argmax(p);
    let cut = alpha * p[peak];
    let mut start = peak;
    while start > 0 && p[start - 1] > cut {
        start -= 1;
    }
    let mut end = peak + 1;
    while end < p.len() && p[end] > cut {
        end += 1;
    }
    Span(start, end)
}

/// Most probable value, merging support entries that share a value.
fn value_argmax(vals: &[i64], p: &[f64]) -> i64 {
    let mut mass: BTreeMap<i64, f64> = BTreeMap::new();
    for (v, x) in vals.iter().zip(p) {
        *mass.entry(*v).or_default() += x;
    }
    let mut best = (vals[0], f64::NEG_INFINITY);
    for (v, m) in mass {
        if m > best.1 {
            best = (v, m);
        }
    }
    best.0
}

/// Decodes the root denotation into an answer.
pub fn decode(g: &Graph, den: &Denotation, span_alpha: f64) -> GoldAnswer {
    let p = g.value(den.var).data();
    match &den.support {
        Support::Tokens(_) => GoldAnswer::Span(span_decode(p, span_alpha)),
        Support::Counts(_) => GoldAnswer::Count(argmax(p) as u32),
        Support::Numbers(vals) => GoldAnswer::Number(value_argmax(vals, p)),
        Support::Dates(vals) => GoldAnswer::Year(value_argmax(vals, p) as i32),
        Support::Bins { lo, .. } => GoldAnswer::Number(lo + argmax(p) as i64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span_trace(g: &mut Graph, p: &[f64]) -> Trace {
        let v = g.variable(crate::autodiff::Matrix::row(p));
        let d = Denotation { kind: crate::dsl::ValueType::TokenDist, var: v, support: Support::Tokens(p.len()) };
        Trace { nodes: [(crate::dsl::NodePath::root(), d)].into_iter().collect() }
    }

    #[test]
    fn span_loss_rewards_even_mass() {
        let mut g = Graph::new();
        let even = span_trace(&mut g, &[0.0, 0.5, 0.5, 0.0]);
        let l = answer_loss(&mut g, &even, &GoldAnswer::Span(Span(1, 3))).unwrap();
        assert!(g.value(l).item().abs() < 1e-9);
        let peaked = span_trace(&mut g, &[0.0, 0.9, 0.1, 0.0]);
        let l = answer_loss(&mut g, &peaked, &GoldAnswer::Span(Span(1, 3))).unwrap();
        // Mass 1 inside the span; KL(uniform || [0.9, 0.1]).
        let kl = 0.5 * libm::log(0.5 / 0.9) + 0.5 * libm::log(0.5 / 0.1);
        assert!((g.value(l).item() - kl).abs() < 1e-9);
        let single = span_trace(&mut g, &[0.25, 0.75]);
        let l = answer_loss(&mut g, &single, &GoldAnswer::Span(Span(1, 2))).unwrap();
        assert!((g.value(l).item() + libm::log(0.75)).abs() < 1e-9);
    }

    #[test]
    fn span_threshold() {
        let p = [0.05, 0.3, 0.4, 0.1, 0.15];
        assert_eq!(span_decode(&p, 0.5), Span(1, 3));
        assert_eq!(span_decode(&p, 0.2), Span(1, 5));
    }

    #[test]
    fn merged_values() {
        assert_eq!(value_argmax(&[3, 7, 3], &[0.3, 0.4, 0.3]), 3);
    }
}
