//! Finite-difference gradient checks and randomly composed test graphs.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, Graph, Matrix, OpTag, Var};
use crate::rng;

/// Largest deviations between reverse-mode and central-difference gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheck {
    /// `|a - n| / max(|a|, |n|, floor)` over all input entries.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_checked: usize,
}

/// Compares the gradient of `build`'s scalar output with respect to every
/// entry of `inputs` against central differences of step `h`.
///
/// `build` must record the same operations for every call.
pub fn gradcheck<F>(inputs: &[Matrix], h: f64, floor: f64, mut build: F) -> Result<GradCheck, AutodiffError>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |build: &mut F, xs: &[Matrix]| -> Result<f64, AutodiffError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out).item())
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.variable(x.clone())).collect();
    let loss = build(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Matrix> = vars.iter().zip(inputs).map(|(v, x)| g.grad(*v).cloned().unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols()))).collect();

    let mut report = GradCheck::default();
    let mut xs = inputs.to_vec();
    for (k, grad) in analytic.iter().enumerate() {
        for i in 0..xs[k].len() {
            let x0 = xs[k].data()[i];
            xs[k].data_mut()[i] = x0 + h;
            let up = eval(&mut build, &xs)?;
            xs[k].data_mut()[i] = x0 - h;
            let down = eval(&mut build, &xs)?;
            xs[k].data_mut()[i] = x0;
            let numeric = (up - down) / (2.0 * h);
            let a = grad.data()[i];
            let abs = libm::fabs(a - numeric);
            let rel = abs / libm::fabs(a).max(libm::fabs(numeric)).max(floor);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.n_checked += 1;
        }
    }
    Ok(report)
}

/// Replays every random draw of its first pass, so a graph built from it
/// records identical operations on perturbed inputs.
struct Tape {
    rng: ChaCha8Rng,
    draws: Vec<u64>,
    pos: Option<usize>,
}

impl Tape {
    fn next(&mut self, fresh: impl FnOnce(&mut ChaCha8Rng) -> u64) -> u64 {
        match &mut self.pos {
            Some(p) => {
                *p += 1;
                self.draws[*p - 1]
            }
            None => {
                let v = fresh(&mut self.rng);
                self.draws.push(v);
                v
            }
        }
    }

    fn below(&mut self, n: usize) -> usize {
        self.next(|r| r.random_range(0..n as u64)) as usize
    }

    fn real(&mut self, lo: f64, hi: f64) -> f64 {
        f64::from_bits(self.next(|r| r.random_range(lo..hi).to_bits()))
    }

    /// A decision computed from values on the first pass only.
    fn decide(&mut self, first_pass: impl FnOnce() -> bool) -> bool {
        self.next(|_| u64::from(first_pass())) == 1
    }
}

const MAX_DIM: usize = 8;

/// Operations a random graph draws from.
pub const RANDOM_OPS: [OpTag; 29] = [
    OpTag::Add,
    OpTag::Sub,
    OpTag::Mul,
    OpTag::Div,
    OpTag::MatMul,
    OpTag::MatMulNT,
    OpTag::Transpose,
    OpTag::Scale,
    OpTag::AddScalar,
    OpTag::PowConst,
    OpTag::ConcatRows,
    OpTag::ConcatCols,
    OpTag::SliceRows,
    OpTag::SliceCols,
    OpTag::SoftmaxRows,
    OpTag::Log,
    OpTag::Exp,
    OpTag::Sigmoid,
    OpTag::Tanh,
    OpTag::Relu,
    OpTag::Softplus,
    OpTag::Sum,
    OpTag::Mean,
    OpTag::SumCols,
    OpTag::MeanRows,
    OpTag::MaxCols,
    OpTag::NormalizeRows,
    OpTag::Gather,
    OpTag::ScatterAdd,
];

/// A seeded random composition of graph operations over small inputs.
///
/// Inputs are 1 to 3 matrices of at most 8×8 entries in `[-1, 1]`. The
/// output is a fixed random weighting of every intermediate value, so every
/// recorded operation reaches the loss. Non-smooth operations (`relu`,
/// `max_cols`) are only applied away from their kinks.
#[derive(Clone, Debug)]
pub struct RandomGraph {
    pub seed: u64,
    pub inputs: Vec<Matrix>,
    pub n_ops: usize,
    draws: Vec<u64>,
}

impl RandomGraph {
    pub fn new(seed: u64) -> Self {
        let mut r = rng::rng(rng::stream(seed, "random-graph"));
        let n_inputs = r.random_range(1..=3);
        let inputs = (0..n_inputs)
            .map(|_| {
                let (rows, cols) = (r.random_range(1..=MAX_DIM), r.random_range(1..=MAX_DIM));
                let data = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
                Matrix::from_vec(rows, cols, data).expect("shape matches data")
            })
            .collect();
        let n_ops = r.random_range(6..=14);
        let mut graph = RandomGraph { seed, inputs, n_ops, draws: Vec::new() };
        let mut tape = Tape { rng: r, draws: Vec::new(), pos: None };
        let mut g = Graph::new();
        let vars: Vec<Var> = graph.inputs.iter().map(|x| g.constant(x.clone())).collect();
        graph.record(&mut g, &vars, &mut tape).expect("random graphs are well-shaped");
        graph.draws = tape.draws;
        graph
    }

    /// Rebuilds the graph over `inputs` (which must have the original shapes).
    pub fn build(&self, g: &mut Graph, inputs: &[Var]) -> Result<Var, AutodiffError> {
        let mut tape = Tape { rng: rng::rng(0), draws: self.draws.clone(), pos: Some(0) };
        self.record(g, inputs, &mut tape)
    }

    /// Operation tags the graph records.
    pub fn ops(&self) -> BTreeSet<OpTag> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self.inputs.iter().map(|x| g.constant(x.clone())).collect();
        let _ = self.build(&mut g, &vars);
        g.op_tags().into_iter().collect()
    }

    fn record(&self, g: &mut Graph, inputs: &[Var], tape: &mut Tape) -> Result<Var, AutodiffError> {
        let mut pool: Vec<Var> = inputs.to_vec();
        let mut made = 0;
        while made < self.n_ops {
            let op = RANDOM_OPS[tape.below(RANDOM_OPS.len())];
            let a = pool[tape.below(pool.len())];
            if let Some(v) = apply(g, tape, &pool, op, a)? {
                pool.push(v);
                made += 1;
            }
        }
        let mut loss: Option<Var> = None;
        for &v in &pool[inputs.len()..] {
            let (r, c) = g.shape(v);
            let w: Vec<f64> = (0..r * c).map(|_| tape.real(-1.0, 1.0)).collect();
            let w = g.constant(Matrix::from_vec(r, c, w).expect("shape matches data"));
            let t = g.mul(v, w)?;
            let t = g.sum(t);
            loss = Some(match loss {
                Some(l) => g.add(l, t)?,
                None => t,
            });
        }
        Ok(loss.expect("at least one operation"))
    }
}

fn max_abs(g: &Graph, v: Var) -> f64 {
    g.value(v).data().iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

/// Strictly positive values bounded away from zero.
fn positive(g: &mut Graph, tape: &mut Tape, v: Var) -> Var {
    match tape.below(3) {
        0 => {
            let s = g.softplus(v);
            g.add_scalar(s, 0.1)
        }
        1 => {
            let s = g.sigmoid(v);
            g.add_scalar(s, 0.1)
        }
        _ => {
            let t = g.tanh(v);
            g.exp(t)
        }
    }
}

/// `v` itself when its entries are moderate, else `tanh(v)`.
fn tame(g: &mut Graph, tape: &mut Tape, v: Var) -> Var {
    if tape.decide(|| max_abs(g, v) > 4.0) {
        g.tanh(v)
    } else {
        v
    }
}

/// A pool value broadcast-compatible with `a`, reduced if necessary.
fn partner(g: &mut Graph, tape: &mut Tape, pool: &[Var], a: Var) -> Var {
    let b = pool[tape.below(pool.len())];
    let ((ar, ac), (br, bc)) = (g.shape(a), g.shape(b));
    let fits = |x: usize, y: usize| x == y || x == 1 || y == 1;
    if fits(ar, br) && fits(ac, bc) {
        b
    } else if fits(ar, br) {
        g.sum_cols(b)
    } else if fits(ac, bc) {
        g.mean_rows(b)
    } else {
        g.sum(b)
    }
}

fn apply(g: &mut Graph, tape: &mut Tape, pool: &[Var], op: OpTag, a: Var) -> Result<Option<Var>, AutodiffError> {
    let (r, c) = g.shape(a);
    let v = match op {
        OpTag::Add | OpTag::Sub | OpTag::Mul => {
            let b = partner(g, tape, pool, a);
            match op {
                OpTag::Add => g.add(a, b)?,
                OpTag::Sub => g.sub(b, a)?,
                _ => g.mul(a, b)?,
            }
        }
        OpTag::Div => {
            let b = partner(g, tape, pool, a);
            let b = positive(g, tape, b);
            g.div(a, b)?
        }
        OpTag::MatMul => {
            let candidates: Vec<Var> = pool.iter().copied().filter(|&b| g.shape(b).0 == c).collect();
            let b = if candidates.is_empty() { g.transpose(a) } else { candidates[tape.below(candidates.len())] };
            let v = g.matmul(a, b)?;
            tame(g, tape, v)
        }
        OpTag::MatMulNT => {
            let candidates: Vec<Var> = pool.iter().copied().filter(|&b| g.shape(b).1 == c).collect();
            let b = candidates[tape.below(candidates.len())];
            let v = if tape.below(2) == 0 {
                g.matmul_nt(a, b)?
            } else {
                // weighted_sum: a distribution over b's rows.
                let logits = g.mean_rows(a);
                let logits = g.matmul_nt(logits, b)?;
                let dist = g.softmax_row(logits);
                g.weighted_sum(dist, b)?
            };
            tame(g, tape, v)
        }
        OpTag::Transpose => g.transpose(a),
        OpTag::Scale => g.scale(a, tape.real(-2.0, 2.0)),
        OpTag::AddScalar => {
            if tape.below(2) == 0 {
                g.add_scalar(a, tape.real(-1.0, 1.0))
            } else {
                g.neg(a)
            }
        }
        OpTag::PowConst => {
            let p = [0.5, 1.5, 2.0, 3.0, -1.0][tape.below(5)];
            let base = positive(g, tape, a);
            g.pow_const(base, p)
        }
        OpTag::ConcatRows | OpTag::ConcatCols => {
            let rows = op == OpTag::ConcatRows;
            let fits: Vec<Var> = pool
                .iter()
                .copied()
                .filter(|&b| {
                    let (br, bc) = g.shape(b);
                    if rows {
                        bc == c && br + r <= MAX_DIM
                    } else {
                        br == r && bc + c <= MAX_DIM
                    }
                })
                .collect();
            if fits.is_empty() {
                return Ok(None);
            }
            let b = fits[tape.below(fits.len())];
            if rows {
                g.concat_rows(&[b, a])?
            } else {
                g.concat_cols(a, b)?
            }
        }
        OpTag::SliceRows | OpTag::SliceCols => {
            let n = if op == OpTag::SliceRows { r } else { c };
            let start = tape.below(n);
            let end = start + 1 + tape.below(n - start);
            if op == OpTag::SliceRows {
                g.slice_rows(a, start, end)?
            } else {
                g.slice_cols(a, start, end)?
            }
        }
        OpTag::SoftmaxRows => g.softmax_row(a),
        OpTag::Log => {
            let p = positive(g, tape, a);
            g.log(p)
        }
        OpTag::Exp => {
            let t = tame(g, tape, a);
            g.exp(t)
        }
        OpTag::Sigmoid => g.sigmoid(a),
        OpTag::Tanh => g.tanh(a),
        OpTag::Softplus => g.softplus(a),
        OpTag::Relu => {
            // Shift so that no entry sits within 0.01 of the kink.
            let shift = tape.real(-0.5, 0.5);
            if !tape.decide(|| g.value(a).data().iter().all(|x| libm::fabs(x + shift) > 0.01)) {
                return Ok(None);
            }
            let s = g.add_scalar(a, shift);
            g.relu(s)
        }
        OpTag::MaxCols => {
            let clear = tape.decide(|| {
                let m = g.value(a);
                (0..r).all(|i| {
                    let mut row: Vec<f64> = (0..c).map(|j| m.get(i, j)).collect();
                    row.sort_by(|x, y| y.total_cmp(x));
                    row.len() < 2 || row[0] - row[1] > 0.01
                })
            });
            if !clear {
                return Ok(None);
            }
            g.max_cols(a)
        }
        OpTag::Sum => g.sum(a),
        OpTag::Mean => g.mean(a),
        OpTag::SumCols => g.sum_cols(a),
        OpTag::MeanRows => g.mean_rows(a),
        OpTag::NormalizeRows => {
            let p = positive(g, tape, a);
            g.normalize_rows(p)
        }
        OpTag::Gather => {
            if tape.below(2) == 0 {
                let n = 1 + tape.below(MAX_DIM);
                let rows: Vec<usize> = (0..n).map(|_| tape.below(r)).collect();
                g.gather_rows(a, &rows)?
            } else {
                let (orows, ocols) = (1 + tape.below(MAX_DIM), 1 + tape.below(MAX_DIM));
                let index: Vec<usize> = (0..orows * ocols).map(|_| tape.below(r * c)).collect();
                g.gather(a, &index, orows, ocols)?
            }
        }
        OpTag::ScatterAdd => {
            let (orows, ocols) = (1 + tape.below(MAX_DIM), 1 + tape.below(MAX_DIM));
            let target: Vec<usize> = (0..r * c).map(|_| tape.below(orows * ocols)).collect();
            g.scatter_add(a, &target, orows, ocols)?
        }
        OpTag::Leaf => return Ok(None),
    };
    Ok(Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_records_identical_graphs() {
        for seed in 0..20 {
            let rg = RandomGraph::new(seed);
            let mut g1 = Graph::new();
            let v1: Vec<Var> = rg.inputs.iter().map(|x| g1.constant(x.clone())).collect();
            let l1 = rg.build(&mut g1, &v1).unwrap();
            let mut g2 = Graph::new();
            let v2: Vec<Var> = rg.inputs.iter().map(|x| g2.variable(x.clone())).collect();
            let l2 = rg.build(&mut g2, &v2).unwrap();
            assert_eq!(g1.len(), g2.len());
            assert_eq!(g1.value(l1).item().to_bits(), g2.value(l2).item().to_bits());
        }
    }

    #[test]
    fn gradcheck_of_a_product() {
        let x = Matrix::row(&[0.5, -2.0]);
        let r = gradcheck(&[x], 1e-5, 1e-8, |g, v| {
            let sq = g.mul(v[0], v[0])?;
            Ok(g.sum(sq))
        })
        .unwrap();
        assert_eq!(r.n_checked, 2);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }
}
