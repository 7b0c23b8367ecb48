use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::encoder::Encoding;
use super::{Denotation, ExecError, ExecOptions, Model, Support, Trace, WorldIndex};
use crate::autodiff::{Graph, Matrix, ParamId, Var};
use crate::dsl::{ModuleKind, NodePath, ProgramNode, ValueType};
use crate::world::QAExample;

const EPS: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Number,
    Date,
}

pub(super) struct Ctx<'a> {
    model: &'a Model,
    g: &'a mut Graph,
    enc: &'a Encoding,
    example: &'a QAExample,
    index: &'a WorldIndex,
    opts: ExecOptions,
    overrides: Option<&'a BTreeMap<NodePath, Matrix>>,
    number_align: Option<Var>,
    date_align: Option<Var>,
}

impl<'a> Ctx<'a> {
    pub(super) fn new(
        model: &'a Model,
        g: &'a mut Graph,
        enc: &'a Encoding,
        example: &'a QAExample,
        index: &'a WorldIndex,
        opts: ExecOptions,
        overrides: Option<&'a BTreeMap<NodePath, Matrix>>,
    ) -> Self {
        Ctx { model, g, enc, example, index, opts, overrides, number_align: None, date_align: None }
    }

    fn param(&mut self, id: ParamId) -> Var {
        self.g.param(&self.model.params, id)
    }

    fn passage_len(&self) -> usize {
        self.g.shape(self.enc.passage).0
    }

    fn tokens(&self, var: Var) -> Denotation {
        Denotation { kind: ValueType::TokenDist, var, support: Support::Tokens(self.passage_len()) }
    }

    /// Mean question-token representation of the node's argument, `1×d`.
    fn arg_rep(&mut self, path: &NodePath) -> Result<Var, ExecError> {
        let span = self.example.arg_spans.get(path).copied().ok_or_else(|| ExecError::MissingArgSpan(path.clone()))?;
        let q_len = self.g.shape(self.enc.question).0;
        if span.is_empty() || span.end() > q_len {
            return Err(ExecError::MissingArgSpan(path.clone()));
        }
        let rows = self.g.slice_rows(self.enc.question, span.start(), span.end())?;
        Ok(self.g.mean_rows(rows))
    }

    /// Row-stochastic token→quantity alignment, `|p|×n`.
    fn alignment(&mut self, which: Quantity, path: &NodePath) -> Result<Var, ExecError> {
        let cached = match which {
            Quantity::Number => self.number_align,
            Quantity::Date => self.date_align,
        };
        if let Some(a) = cached {
            return Ok(a);
        }
        let (positions, weight) = match which {
            Quantity::Number => (&self.index.number_tokens, self.model.ids.align_num),
            Quantity::Date => (&self.index.date_tokens, self.model.ids.align_date),
        };
        if positions.is_empty() {
            return Err(ExecError::EmptySupport(path.clone()));
        }
        let positions = positions.clone();
        let n = positions.len();
        let p_len = self.passage_len();
        let hn = self.g.gather_rows(self.enc.passage, &positions)?;
        let w = self.param(weight);
        let hw = self.g.matmul(self.enc.passage, w)?;
        let scores = self.g.matmul_nt(hw, hn)?;
        let sent = &self.index.sentence;
        let mut prior = Matrix::zeros(p_len, n);
        for t in 0..p_len {
            for (j, &pos) in positions.iter().enumerate() {
                if sent.get(t) != sent.get(pos) {
                    prior.set(t, j, -self.model.config.align_penalty);
                }
            }
        }
        let prior = self.g.constant(prior);
        let scores = self.g.add(scores, prior)?;
        let a = self.g.softmax_row(scores);
        match which {
            Quantity::Number => self.number_align = Some(a),
            Quantity::Date => self.date_align = Some(a),
        }
        Ok(a)
    }

    fn values(&self, which: Quantity) -> Vec<i64> {
        match which {
            Quantity::Number => self.index.number_values.clone(),
            Quantity::Date => self.index.date_years.clone(),
        }
    }

    /// Distribution over the passage's numbers (or dates) referenced by `p`.
    fn quantity_dist(&mut self, p: Var, which: Quantity, path: &NodePath) -> Result<Var, ExecError> {
        let a = self.alignment(which, path)?;
        Ok(self.g.matmul(p, a)?)
    }

    /// Expected value under a quantity distribution, `1×1`.
    fn expectation(&mut self, dist: Var, which: Quantity) -> Result<Var, ExecError> {
        let vals: Vec<f64> = self.values(which).iter().map(|&v| v as f64).collect();
        let col = self.g.constant(Matrix::column(&vals));
        Ok(self.g.matmul(dist, col)?)
    }

    pub(super) fn eval(&mut self, node: &ProgramNode, path: NodePath, trace: &mut Trace) -> Result<Denotation, ExecError> {
        if let Some(m) = self.overrides.and_then(|o| o.get(&path)) {
            let var = self.g.constant(m.clone());
            let den = self.tokens(var);
            trace.nodes.insert(path, den.clone());
            return Ok(den);
        }
        let mut kids = Vec::with_capacity(node.children.len());
        for (i, c) in node.children.iter().enumerate() {
            kids.push(self.eval(c, path.child(i), trace)?);
        }
        let den = match node.module {
            ModuleKind::Find => self.find(&path)?,
            ModuleKind::Filter => self.filter(&path, kids[0].var)?,
            ModuleKind::Project => self.project(&path, kids[0].var)?,
            ModuleKind::Span => kids[0].clone(),
            ModuleKind::Count => self.count(kids[0].var)?,
            ModuleKind::FindNum => {
                let var = self.quantity_dist(kids[0].var, Quantity::Number, &path)?;
                Denotation { kind: ValueType::NumberDist, var, support: Support::Numbers(self.values(Quantity::Number)) }
            }
            ModuleKind::FindDate => {
                let var = self.quantity_dist(kids[0].var, Quantity::Date, &path)?;
                Denotation { kind: ValueType::DateDist, var, support: Support::Dates(self.values(Quantity::Date)) }
            }
            ModuleKind::FindMaxNum => self.extremum(&path, kids[0].var, false)?,
            ModuleKind::FindMinNum => self.extremum(&path, kids[0].var, true)?,
            ModuleKind::NumCompareGt => self.compare(&path, kids[0].var, kids[1].var, Quantity::Number, false)?,
            ModuleKind::NumCompareLt => self.compare(&path, kids[0].var, kids[1].var, Quantity::Number, true)?,
            ModuleKind::DateCompareGt => self.compare(&path, kids[0].var, kids[1].var, Quantity::Date, false)?,
            ModuleKind::DateCompareLt => self.compare(&path, kids[0].var, kids[1].var, Quantity::Date, true)?,
            ModuleKind::NumAdd => self.combine(&kids[0], &kids[1], Quantity::Number, |a, b| a + b)?,
            ModuleKind::NumDiff => self.combine(&kids[0], &kids[1], Quantity::Number, |a, b| a - b)?,
            ModuleKind::TimeDiff => {
                let d1 = self.quantity_dist(kids[0].var, Quantity::Date, &path)?;
                let d2 = self.quantity_dist(kids[1].var, Quantity::Date, &path)?;
                let years = Support::Dates(self.values(Quantity::Date));
                let a = Denotation { kind: ValueType::DateDist, var: d1, support: years.clone() };
                let b = Denotation { kind: ValueType::DateDist, var: d2, support: years };
                self.combine(&a, &b, Quantity::Date, |x, y| (x - y).abs())?
            }
        };
        trace.nodes.insert(path, den.clone());
        Ok(den)
    }

    fn find(&mut self, path: &NodePath) -> Result<Denotation, ExecError> {
        let a = self.arg_rep(path)?;
        let w = self.param(self.model.ids.find);
        let aw = self.g.matmul(a, w)?;
        let scores = self.g.matmul_nt(aw, self.enc.passage)?;
        let p = self.g.softmax_row(scores);
        Ok(self.tokens(p))
    }

    fn filter(&mut self, path: &NodePath, input: Var) -> Result<Denotation, ExecError> {
        let a = self.arg_rep(path)?;
        let w = self.param(self.model.ids.filter_w);
        let b = self.param(self.model.ids.filter_b);
        let aw = self.g.matmul(a, w)?;
        let scores = self.g.matmul_nt(aw, self.enc.passage)?;
        let scores = self.g.add(scores, b)?;
        let gate = self.g.sigmoid(scores);
        let kept = self.g.mul(input, gate)?;
        let p = self.g.normalize_rows(kept);
        Ok(self.tokens(p))
    }

    fn project(&mut self, path: &NodePath, input: Var) -> Result<Denotation, ExecError> {
        let a = self.arg_rep(path)?;
        let pooled = self.g.matmul(input, self.enc.passage)?;
        let q = self.g.concat_cols(a, pooled)?;
        let w = self.param(self.model.ids.project);
        let qw = self.g.matmul(q, w)?;
        let scores = self.g.matmul_nt(qw, self.enc.passage)?;
        let p = self.g.softmax_row(scores);
        Ok(self.tokens(p))
    }

    /// Soft argmax (or argmin) over the numbers the input refers to, mapped
    /// back to the tokens of the winning number.
    fn extremum(&mut self, path: &NodePath, input: Var, minimum: bool) -> Result<Denotation, ExecError> {
        let a = self.alignment(Quantity::Number, path)?;
        let mass = self.g.matmul(input, a)?;
        let peak = self.g.max_cols(mass);
        let peak = self.g.add_scalar(peak, 1e-12);
        let incl = self.g.div(mass, peak)?;

        let vals = self.values(Quantity::Number);
        let n = vals.len();
        let sign = if minimum { -1.0 } else { 1.0 };
        let tau = self.opts.tau;
        // beats[j, i] = σ((v_j − v_i)/τ): probability that number j outranks i.
        let mut beats = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    let z = sign * (vals[j] - vals[i]) as f64 / tau;
                    beats.set(j, i, crate::autodiff::sigmoid(z));
                }
            }
        }
        let beats = self.g.constant(beats);
        // survive[j, i] = 1 + ε − π_j · beats[j, i]
        let incl_col = self.g.transpose(incl);
        let lose = self.g.mul(incl_col, beats)?;
        let lose = self.g.neg(lose);
        let survive = self.g.add_scalar(lose, 1.0 + EPS);
        let log_survive = self.g.log(survive);
        let ones = self.g.constant(Matrix::filled(1, n, 1.0));
        let penalty = self.g.matmul(ones, log_survive)?;
        let incl_eps = self.g.add_scalar(incl, EPS);
        let log_incl = self.g.log(incl_eps);
        let logits = self.g.add(log_incl, penalty)?;
        let winner = self.g.softmax_row(logits);

        let mass_eps = self.g.add_scalar(mass, EPS);
        let ratio = self.g.div(winner, mass_eps)?;
        let back = self.g.matmul_nt(ratio, a)?;
        let weighted = self.g.mul(input, back)?;
        let weighted = self.g.add_scalar(weighted, 1e-300);
        let p = self.g.normalize_rows(weighted);
        Ok(self.tokens(p))
    }

    fn count(&mut self, input: Var) -> Result<Denotation, ExecError> {
        let cfg = &self.model.config;
        let ids = &self.model.ids;
        let (beta, c_max, knots) = (cfg.count_beta, cfg.count_max, cfg.count_knots.clone());
        let (slopes_id, bias_id, gamma_id) = (ids.count_slopes, ids.count_bias, ids.count_gamma);

        let peak = self.g.max_cols(input);
        let peak = self.g.add_scalar(peak, 1e-12);
        let rel = self.g.div(input, peak)?;
        let sharp = self.g.pow_const(rel, beta);
        let m = self.g.sum(sharp);

        let knots = self.g.constant(Matrix::row(&knots));
        let above = self.g.sub(m, knots)?;
        let above = self.g.relu(above);
        let slopes = self.param(slopes_id);
        let slopes = self.g.softplus(slopes);
        let ramp = self.g.mul(slopes, above)?;
        let ramp = self.g.sum(ramp);
        let bias = self.param(bias_id);
        let mu = self.g.add(ramp, bias)?;

        let counts: Vec<f64> = (0..=c_max).map(|c| c as f64).collect();
        let counts = self.g.constant(Matrix::row(&counts));
        let dist = self.g.sub(mu, counts)?;
        let sq = self.g.mul(dist, dist)?;
        let gamma = self.param(gamma_id);
        let gamma = self.g.softplus(gamma);
        let gamma = self.g.add_scalar(gamma, 0.1);
        let logits = self.g.mul(sq, gamma)?;
        let logits = self.g.neg(logits);
        let p = self.g.softmax_row(logits);
        Ok(Denotation { kind: ValueType::CountDist, var: p, support: Support::Counts(c_max + 1) })
    }

    fn compare(&mut self, path: &NodePath, p1: Var, p2: Var, which: Quantity, less: bool) -> Result<Denotation, ExecError> {
        let n1 = self.quantity_dist(p1, which, path)?;
        let n2 = self.quantity_dist(p2, which, path)?;
        let e1 = self.expectation(n1, which)?;
        let e2 = self.expectation(n2, which)?;
        let diff = self.g.sub(e1, e2)?;
        let z = self.g.scale(diff, 1.0 / self.model.config.tau_compare);
        let gate = self.g.sigmoid(z);
        let neg = self.g.neg(gate);
        let rest = self.g.add_scalar(neg, 1.0);
        let (first, second) = if less { (p2, p1) } else { (p1, p2) };
        let a = self.g.mul(gate, first)?;
        let b = self.g.mul(rest, second)?;
        let p = self.g.add(a, b)?;
        Ok(self.tokens(p))
    }

    /// Outer product of two quantity distributions accumulated into value bins.
    fn combine(&mut self, a: &Denotation, b: &Denotation, which: Quantity, op: fn(i64, i64) -> i64) -> Result<Denotation, ExecError> {
        let cfg = &self.model.config;
        let (lo, hi) = match which {
            Quantity::Number => (cfg.num_bins_lo, cfg.num_bins_hi),
            Quantity::Date => (cfg.year_bins_lo, cfg.year_bins_hi),
        };
        let va = support_values(&a.support);
        let vb = support_values(&b.support);
        let (p, len) = outer_bins(self.g, a.var, &va, b.var, &vb, lo, hi, op)?;
        Ok(Denotation { kind: ValueType::ComposedValueDist, var: p, support: Support::Bins { lo, len } })
    }
}

/// Distribution of `op(x, y)` for independent `x ~ a`, `y ~ b`, over the
/// bins `lo..=hi`; out-of-range values land in the boundary bins.
#[allow(clippy::too_many_arguments)]
pub(crate) fn outer_bins(
    g: &mut Graph,
    a: Var,
    a_vals: &[i64],
    b: Var,
    b_vals: &[i64],
    lo: i64,
    hi: i64,
    op: fn(i64, i64) -> i64,
) -> Result<(Var, usize), ExecError> {
    let len = (hi - lo + 1) as usize;
    let mut target = Vec::with_capacity(a_vals.len() * b_vals.len());
    for &x in a_vals {
        for &y in b_vals {
            target.push((op(x, y).clamp(lo, hi) - lo) as usize);
        }
    }
    let col = g.transpose(a);
    let outer = g.matmul(col, b)?;
    Ok((g.scatter_add(outer, &target, 1, len)?, len))
}

fn support_values(s: &Support) -> Vec<i64> {
    match s {
        Support::Numbers(v) | Support::Dates(v) => v.clone(),
        Support::Tokens(n) | Support::Counts(n) => (0..*n as i64).collect(),
        Support::Bins { lo, len } => (*lo..*lo + *len as i64).collect(),
    }
}
