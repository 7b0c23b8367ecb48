use alloc::string::String;
use alloc::vec::Vec;

use super::{numeral, ExecError, Model};
use crate::autodiff::{Graph, Matrix, Var};

/// Contextual token representations of one question–passage pair.
#[derive(Clone, Copy, Debug)]
pub struct Encoding {
    /// Question tokens, `|q|×d`.
    pub question: Var,
    /// Passage tokens, `|p|×d`.
    pub passage: Var,
}

fn sentence_ids(tokens: &[String]) -> Vec<usize> {
    let mut s = 0;
    tokens
        .iter()
        .map(|t| {
            let id = s;
            if t == "." {
                s += 1;
            }
            id
        })
        .collect()
}

/// Index into the relative-bias row for every (query, key) pair.
///
/// Same-sentence offsets use buckets `0..=2R`, offsets across sentences of the
/// same segment use `2R+1..=4R+1`, and question–passage pairs share the last
/// bucket.
fn bias_index(q_len: usize, sent: &[usize], radius: usize) -> Vec<usize> {
    let n = sent.len();
    let r = radius as isize;
    let cross = 4 * radius + 2;
    let mut idx = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let same_segment = (i < q_len) == (j < q_len);
            if !same_segment {
                idx.push(cross);
                continue;
            }
            let off = (j as isize - i as isize).clamp(-r, r) + r;
            let base = if sent[i] == sent[j] { 0 } else { 2 * radius + 1 };
            idx.push(base + off as usize);
        }
    }
    idx
}

pub(super) fn encode(model: &Model, g: &mut Graph, question: &[String], passage: &[String]) -> Result<Encoding, ExecError> {
    let cfg = &model.config;
    let ids = &model.ids;
    let p = &model.params;
    let (q_len, p_len) = (question.len(), passage.len());
    let n = q_len + p_len;
    let all: Vec<&String> = question.iter().chain(passage).collect();

    let tokens: Vec<usize> = all.iter().map(|t| model.vocab.id(t) as usize).collect();
    let last = cfg.max_positions - 1;
    let positions: Vec<usize> = (0..q_len).chain(0..p_len).map(|i| i.min(last)).collect();
    let segments: Vec<usize> = (0..n).map(|i| usize::from(i >= q_len)).collect();

    let tok = g.param(p, ids.tok);
    let pos = g.param(p, ids.pos);
    let seg = g.param(p, ids.seg);
    let x_tok = g.gather_rows(tok, &tokens)?;
    let x_pos = g.gather_rows(pos, &positions)?;
    let x_seg = g.gather_rows(seg, &segments)?;
    let mut x = g.add(x_tok, x_pos)?;
    x = g.add(x, x_seg)?;

    let mut mag = alloc::vec![0.0; n];
    let mut year = alloc::vec![0.0; n];
    for (i, t) in all.iter().enumerate() {
        if let Some(v) = numeral(t) {
            if v < 1000 {
                mag[i] = v as f64 / 40.0;
            } else {
                year[i] = (v as f64 - 1700.0) / 300.0;
            }
        }
    }
    for (feat, id) in [(mag, ids.num_feat), (year, ids.year_feat)] {
        if feat.iter().any(|&f| f != 0.0) {
            let col = g.constant(Matrix::column(&feat));
            let u = g.param(p, id);
            let add = g.mul(col, u)?;
            x = g.add(x, add)?;
        }
    }

    let wq = g.param(p, ids.wq);
    let wk = g.param(p, ids.wk);
    let wv = g.param(p, ids.wv);
    let wo = g.param(p, ids.wo);
    let q = g.matmul(x, wq)?;
    let k = g.matmul(x, wk)?;
    let v = g.matmul(x, wv)?;
    let scores = g.matmul_nt(q, k)?;
    let scores = g.scale(scores, 1.0 / libm::sqrt(cfg.dim as f64));

    let mut sent: Vec<usize> = sentence_ids(question);
    let offset = sent.last().map_or(0, |s| s + 1);
    sent.extend(sentence_ids(passage).into_iter().map(|s| s + offset));
    let rel = g.param(p, ids.rel);
    let bias = g.gather(rel, &bias_index(q_len, &sent, cfg.rel_radius), n, n)?;
    let scores = g.add(scores, bias)?;
    let attn = g.softmax_row(scores);
    let mixed = g.matmul(attn, v)?;
    let out = g.matmul(mixed, wo)?;
    let h = g.add(x, out)?;

    let question = g.slice_rows(h, 0, q_len)?;
    let passage = g.slice_rows(h, q_len, n)?;
    Ok(Encoding { question, passage })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_buckets() {
        // question: 2 tokens, passage: "a . b" (two sentences)
        let sent = [0, 0, 1, 1, 2];
        let idx = bias_index(2, &sent, 1);
        let at = |i: usize, j: usize| idx[i * 5 + j];
        assert_eq!(at(0, 0), 1);
        assert_eq!(at(0, 1), 2);
        assert_eq!(at(0, 2), 6);
        assert_eq!(at(2, 3), 2);
        assert_eq!(at(2, 4), 3 + 2);
        assert_eq!(at(4, 2), 3);
    }
}
