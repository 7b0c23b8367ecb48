//! The recording graph and its primitive operations.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order and [`Graph::backward`] is a single reverse sweep.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul, matmul_nt, matmul_tn, Matrix};
use super::{AutodiffError, ShapeError};

/// Handle to a value recorded in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Transpose(Var),
    Scale(Var, f64),
    AddScalar(Var),
    PowConst(Var, f64),
    ConcatRows(Vec<Var>),
    ConcatCols(Var, Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    SoftmaxRows(Var),
    Log(Var),
    Exp(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    MeanRows(Var),
    MaxCols(Var, Vec<usize>),
    NormalizeRows(Var),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
}

/// Operation tag of a recorded node, for inspection and tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpTag {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    MatMulNT,
    Transpose,
    Scale,
    AddScalar,
    PowConst,
    ConcatRows,
    ConcatCols,
    SliceRows,
    SliceCols,
    SoftmaxRows,
    Log,
    Exp,
    Sigmoid,
    Tanh,
    Relu,
    Softplus,
    Sum,
    Mean,
    SumCols,
    MeanRows,
    MaxCols,
    NormalizeRows,
    Gather,
    ScatterAdd,
}

struct Node {
    value: Matrix,
    grad: Option<Matrix>,
    op: Op,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// A computation record: values, adjoints and the operations linking them.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    backward_done: bool,
    visits: Vec<u32>,
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize), ShapeError> {
    let dim = |x: usize, y: usize| if x == y || y == 1 { Some(x) } else if x == 1 { Some(y) } else { None };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(ShapeError::new(op, a, b)),
    }
}

#[inline]
fn bidx(shape: (usize, usize), i: usize, j: usize) -> usize {
    let r = if shape.0 == 1 { 0 } else { i };
    let c = if shape.1 == 1 { 0 } else { j };
    r * shape.1 + c
}

/// Sums `g` (of the broadcast output shape) down to `shape`.
fn reduce_to(g: &Matrix, shape: (usize, usize)) -> Matrix {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Matrix::zeros(shape.0, shape.1);
    let (r, c) = g.shape();
    for i in 0..r {
        for j in 0..c {
            out.data_mut()[bidx(shape, i, j)] += g.get(i, j);
        }
    }
    out
}

fn zip_broadcast(a: &Matrix, b: &Matrix, out_shape: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Matrix {
    let mut out = Matrix::zeros(out_shape.0, out_shape.1);
    let (sa, sb) = (a.shape(), b.shape());
    if sa == sb {
        for ((o, x), y) in out.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
            *o = f(*x, *y);
        }
        return out;
    }
    for i in 0..out_shape.0 {
        for j in 0..out_shape.1 {
            out.data_mut()[i * out_shape.1 + j] = f(a.data()[bidx(sa, i, j)], b.data()[bidx(sb, i, j)]);
        }
    }
    out
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let (r, c) = x.shape();
    let mut out = Matrix::zeros(r, c);
    for i in 0..r {
        let row = x.row_slice(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (j, v) in row.iter().enumerate() {
            let e = libm::exp(v - max);
            out.data_mut()[i * c + j] = e;
            s += e;
        }
        for j in 0..c {
            out.data_mut()[i * c + j] /= s;
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, grad: None, op, requires_grad, param: None });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn op_tag(&self, v: Var) -> OpTag {
        match &self.nodes[v.0].op {
            Op::Leaf => OpTag::Leaf,
            Op::Add(..) => OpTag::Add,
            Op::Sub(..) => OpTag::Sub,
            Op::Mul(..) => OpTag::Mul,
            Op::Div(..) => OpTag::Div,
            Op::MatMul(..) => OpTag::MatMul,
            Op::MatMulNT(..) => OpTag::MatMulNT,
            Op::Transpose(..) => OpTag::Transpose,
            Op::Scale(..) => OpTag::Scale,
            Op::AddScalar(..) => OpTag::AddScalar,
            Op::PowConst(..) => OpTag::PowConst,
            Op::ConcatRows(..) => OpTag::ConcatRows,
            Op::ConcatCols(..) => OpTag::ConcatCols,
            Op::SliceRows(..) => OpTag::SliceRows,
            Op::SliceCols(..) => OpTag::SliceCols,
            Op::SoftmaxRows(..) => OpTag::SoftmaxRows,
            Op::Log(..) => OpTag::Log,
            Op::Exp(..) => OpTag::Exp,
            Op::Sigmoid(..) => OpTag::Sigmoid,
            Op::Tanh(..) => OpTag::Tanh,
            Op::Relu(..) => OpTag::Relu,
            Op::Softplus(..) => OpTag::Softplus,
            Op::Sum(..) => OpTag::Sum,
            Op::Mean(..) => OpTag::Mean,
            Op::SumCols(..) => OpTag::SumCols,
            Op::MeanRows(..) => OpTag::MeanRows,
            Op::MaxCols(..) => OpTag::MaxCols,
            Op::NormalizeRows(..) => OpTag::NormalizeRows,
            Op::Gather(..) => OpTag::Gather,
            Op::ScatterAdd(..) => OpTag::ScatterAdd,
        }
    }

    /// Tags of every recorded node, in recording order.
    pub fn op_tags(&self) -> Vec<OpTag> {
        (0..self.nodes.len()).map(|i| self.op_tag(Var(i))).collect()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, false)
    }

    /// A leaf that receives a gradient.
    pub fn variable(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, true)
    }

    /// Records parameter `id` once per graph and returns its handle.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let i = id.index();
        if self.param_vars.len() <= i {
            self.param_vars.resize(i + 1, None);
        }
        if let Some(v) = self.param_vars[i] {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Leaf, true);
        self.nodes[v.0].param = Some(id);
        self.param_vars[i] = Some(v);
        v
    }

    // ---- elementwise binary (broadcasting: each dim equal or 1) ----

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let s = broadcast_shape("add", self.shape(a), self.shape(b))?;
        let v = zip_broadcast(self.value(a), self.value(b), s, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let s = broadcast_shape("sub", self.shape(a), self.shape(b))?;
        let v = zip_broadcast(self.value(a), self.value(b), s, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let s = broadcast_shape("mul", self.shape(a), self.shape(b))?;
        let v = zip_broadcast(self.value(a), self.value(b), s, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let s = broadcast_shape("div", self.shape(a), self.shape(b))?;
        let v = zip_broadcast(self.value(a), self.value(b), s, |x, y| x / y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Div(a, b), rg))
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(ShapeError::new("matmul", sa, sb));
        }
        let v = matmul(self.value(a), self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(ShapeError::new("matmul_nt", sa, sb));
        }
        let v = matmul_nt(self.value(a), self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMulNT(a, b), rg))
    }

    /// `dist · m` for a 1×n distribution and an n×d matrix.
    pub fn weighted_sum(&mut self, dist: Var, m: Var) -> Result<Var, ShapeError> {
        let (sd, sm) = (self.shape(dist), self.shape(m));
        if sd.0 != 1 || sd.1 != sm.0 {
            return Err(ShapeError::new("weighted_sum", sd, sm));
        }
        self.matmul(dist, m)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(v, Op::Transpose(a), rg)
    }

    // ---- unary ----

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| x * k);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, k), rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).map(|x| x + k);
        let rg = self.rg(a);
        self.push(v, Op::AddScalar(a), rg)
    }

    /// Elementwise `x^p`; inputs must be nonnegative unless `p` is an integer.
    pub fn pow_const(&mut self, a: Var, p: f64) -> Var {
        let v = self.value(a).map(|x| libm::pow(x, p));
        let rg = self.rg(a);
        self.push(v, Op::PowConst(a, p), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(libm::log);
        let rg = self.rg(a);
        self.push(v, Op::Log(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(libm::exp);
        let rg = self.rg(a);
        self.push(v, Op::Exp(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(libm::tanh);
        let rg = self.rg(a);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        let rg = self.rg(a);
        self.push(v, Op::Softplus(a), rg)
    }

    /// Row-wise softmax.
    pub fn softmax_row(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::SoftmaxRows(a), rg)
    }

    /// Divides each row by its sum.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (r, c) = x.shape();
        let mut v = x.clone();
        for i in 0..r {
            let s: f64 = x.row_slice(i).iter().sum();
            for j in 0..c {
                v.data_mut()[i * c + j] /= s;
            }
        }
        let rg = self.rg(a);
        self.push(v, Op::NormalizeRows(a), rg)
    }

    // ---- reductions ----

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Matrix::scalar(x.sum() / x.len() as f64);
        let rg = self.rg(a);
        self.push(v, Op::Mean(a), rg)
    }

    /// Per-row sums as an r×1 column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let sums: Vec<f64> = (0..x.rows()).map(|i| x.row_slice(i).iter().sum()).collect();
        let v = Matrix::column(&sums);
        let rg = self.rg(a);
        self.push(v, Op::SumCols(a), rg)
    }

    /// Mean over rows as a 1×c row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (r, c) = x.shape();
        let mut out = Matrix::zeros(1, c);
        for i in 0..r {
            for j in 0..c {
                out.data_mut()[j] += x.get(i, j) / r as f64;
            }
        }
        let rg = self.rg(a);
        self.push(out, Op::MeanRows(a), rg)
    }

    /// Per-row maxima as an r×1 column; the gradient flows to the first argmax.
    pub fn max_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut arg = Vec::with_capacity(x.rows());
        let mut vals = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = x.row_slice(i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            arg.push(best);
            vals.push(row[best]);
        }
        let rg = self.rg(a);
        self.push(Matrix::column(&vals), Op::MaxCols(a, arg), rg)
    }

    // ---- structural ----

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, ShapeError> {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(ShapeError::new("concat_rows", self.shape(parts[0]), s));
            }
            data.extend_from_slice(self.value(p).data());
            rows += s.0;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let v = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, ShapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(ShapeError::new("concat_cols", sa, sb));
        }
        let mut out = Matrix::zeros(sa.0, sa.1 + sb.1);
        for i in 0..sa.0 {
            for j in 0..sa.1 {
                out.set(i, j, self.value(a).get(i, j));
            }
            for j in 0..sb.1 {
                out.set(i, sa.1 + j, self.value(b).get(i, j));
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::ConcatCols(a, b), rg))
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, ShapeError> {
        let s = self.shape(a);
        if start >= end || end > s.0 {
            return Err(ShapeError::new("slice_rows", s, (start, end)));
        }
        let v = Matrix::from_vec(end - start, s.1, self.value(a).data()[start * s.1..end * s.1].to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::SliceRows(a, start), rg))
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, ShapeError> {
        let s = self.shape(a);
        if start >= end || end > s.1 {
            return Err(ShapeError::new("slice_cols", s, (start, end)));
        }
        let mut out = Matrix::zeros(s.0, end - start);
        for i in 0..s.0 {
            for j in start..end {
                out.set(i, j - start, self.value(a).get(i, j));
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::SliceCols(a, start), rg))
    }

    /// Picks whole rows of `a`, e.g. an embedding lookup.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var, ShapeError> {
        let (r, c) = self.shape(a);
        let mut flat = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(ShapeError::new("gather_rows", (r, c), (i, 0)));
            }
            flat.extend((i * c)..(i * c + c));
        }
        self.gather(a, &flat, rows.len(), c)
    }

    /// Builds an `rows×cols` matrix whose k-th entry is `a.data[index[k]]`.
    pub fn gather(&mut self, a: Var, index: &[usize], rows: usize, cols: usize) -> Result<Var, ShapeError> {
        let src = self.value(a);
        if index.len() != rows * cols {
            return Err(ShapeError::new("gather", (rows, cols), (index.len(), 1)));
        }
        let mut data = Vec::with_capacity(index.len());
        for &k in index {
            match src.data().get(k) {
                Some(x) => data.push(*x),
                None => return Err(ShapeError::new("gather", src.shape(), (k, 0))),
            }
        }
        let v = Matrix::from_vec(rows, cols, data)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Gather(a, index.to_vec()), rg))
    }

    /// Sums entries of `a` into a `rows×cols` output: element k goes to `target[k]`.
    pub fn scatter_add(&mut self, a: Var, target: &[usize], rows: usize, cols: usize) -> Result<Var, ShapeError> {
        let src = self.value(a);
        if target.len() != src.len() {
            return Err(ShapeError::new("scatter_add", src.shape(), (target.len(), 1)));
        }
        let mut out = Matrix::zeros(rows, cols);
        for (k, &t) in target.iter().enumerate() {
            if t >= rows * cols {
                return Err(ShapeError::new("scatter_add", (rows, cols), (t, 0)));
            }
            out.data_mut()[t] += src.data()[k];
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::ScatterAdd(a, target.to_vec()), rg))
    }

    // ---- backward ----

    /// Reverse sweep from a scalar `loss`, accumulating `∂loss/∂v` into every
    /// node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.backward_done {
            return Err(AutodiffError::State("backward called twice without reset"));
        }
        if self.shape(loss) != (1, 1) {
            return Err(ShapeError::new("backward", self.shape(loss), (1, 1)).into());
        }
        self.backward_done = true;
        self.visits = vec![0; self.nodes.len()];
        self.nodes[loss.0].grad = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else { continue };
            self.visits[i] += 1;
            let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.propagate(i, &op, &g);
            self.nodes[i].op = op;
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    /// How many times each node was processed by the last backward sweep.
    pub fn visit_counts(&self) -> &[u32] {
        &self.visits
    }

    /// Clears all adjoints so that [`backward`](Self::backward) may run again.
    pub fn reset(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    fn acc(&mut self, v: Var, g: Matrix) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(existing) => existing.add_assign(&g),
            None => node.grad = Some(g),
        }
    }

    fn propagate(&mut self, i: usize, op: &Op, g: &Matrix) {
        let out_shape = g.shape();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                if self.rg(*a) {
                    self.acc(*a, reduce_to(g, sa));
                }
                if self.rg(*b) {
                    self.acc(*b, reduce_to(g, sb));
                }
            }
            Op::Sub(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                if self.rg(*a) {
                    self.acc(*a, reduce_to(g, sa));
                }
                if self.rg(*b) {
                    self.acc(*b, reduce_to(&g.map(|x| -x), sb));
                }
            }
            Op::Mul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                if self.rg(*a) {
                    let t = zip_broadcast(g, self.value(*b), out_shape, |x, y| x * y);
                    self.acc(*a, reduce_to(&t, sa));
                }
                if self.rg(*b) {
                    let t = zip_broadcast(g, self.value(*a), out_shape, |x, y| x * y);
                    self.acc(*b, reduce_to(&t, sb));
                }
            }
            Op::Div(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                if self.rg(*a) {
                    let t = zip_broadcast(g, self.value(*b), out_shape, |x, y| x / y);
                    self.acc(*a, reduce_to(&t, sa));
                }
                if self.rg(*b) {
                    // d(a/b)/db = -out / b
                    let out = &self.nodes[i].value;
                    let go = zip_broadcast(g, out, out_shape, |x, y| -x * y);
                    let t = zip_broadcast(&go, self.value(*b), out_shape, |x, y| x / y);
                    self.acc(*b, reduce_to(&t, sb));
                }
            }
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let ga = matmul_nt(g, self.value(*b));
                    self.acc(*a, ga);
                }
                if self.rg(*b) {
                    let gb = matmul_tn(self.value(*a), g);
                    self.acc(*b, gb);
                }
            }
            Op::MatMulNT(a, b) => {
                if self.rg(*a) {
                    let ga = matmul(g, self.value(*b));
                    self.acc(*a, ga);
                }
                if self.rg(*b) {
                    let gb = matmul_tn(g, self.value(*a));
                    self.acc(*b, gb);
                }
            }
            Op::Transpose(a) => self.acc(*a, g.transpose()),
            Op::Scale(a, k) => {
                let k = *k;
                self.acc(*a, g.map(|x| x * k));
            }
            Op::AddScalar(a) => self.acc(*a, g.clone()),
            Op::PowConst(a, p) => {
                let p = *p;
                let x = self.value(*a);
                let t = zip_broadcast(g, x, out_shape, |gv, xv| {
                    if p == 1.0 {
                        gv
                    } else if xv == 0.0 && p > 1.0 {
                        0.0
                    } else {
                        gv * p * libm::pow(xv, p - 1.0)
                    }
                });
                self.acc(*a, t);
            }
            Op::ConcatRows(parts) => {
                let cols = out_shape.1;
                let mut offset = 0;
                for p in parts {
                    let (r, _) = self.shape(*p);
                    if self.rg(*p) {
                        let slice = g.data()[offset * cols..(offset + r) * cols].to_vec();
                        self.acc(*p, Matrix::from_vec(r, cols, slice).expect("slice shape"));
                    }
                    offset += r;
                }
            }
            Op::ConcatCols(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let mut ga = Matrix::zeros(sa.0, sa.1);
                let mut gb = Matrix::zeros(sb.0, sb.1);
                for r in 0..sa.0 {
                    for c in 0..sa.1 {
                        ga.set(r, c, g.get(r, c));
                    }
                    for c in 0..sb.1 {
                        gb.set(r, c, g.get(r, sa.1 + c));
                    }
                }
                self.acc(*a, ga);
                self.acc(*b, gb);
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                let n = g.len();
                ga.data_mut()[start * c..start * c + n].copy_from_slice(g.data());
                self.acc(*a, ga);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for i in 0..out_shape.0 {
                    for j in 0..out_shape.1 {
                        ga.set(i, start + j, g.get(i, j));
                    }
                }
                self.acc(*a, ga);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let (r, c) = y.shape();
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    let ys = y.row_slice(row);
                    let gs = g.row_slice(row);
                    let dotp: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        ga.set(row, j, ys[j] * (gs[j] - dotp));
                    }
                }
                self.acc(*a, ga);
            }
            Op::NormalizeRows(a) => {
                let x = self.value(*a);
                let y = &self.nodes[i].value;
                let (r, c) = y.shape();
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    let s: f64 = x.row_slice(row).iter().sum();
                    let ys = y.row_slice(row);
                    let gs = g.row_slice(row);
                    let dotp: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        ga.set(row, j, (gs[j] - dotp) / s);
                    }
                }
                self.acc(*a, ga);
            }
            Op::Log(a) => {
                let t = zip_broadcast(g, self.value(*a), out_shape, |gv, xv| gv / xv);
                self.acc(*a, t);
            }
            Op::Exp(a) => {
                let t = zip_broadcast(g, &self.nodes[i].value, out_shape, |gv, yv| gv * yv);
                self.acc(*a, t);
            }
            Op::Sigmoid(a) => {
                let t = zip_broadcast(g, &self.nodes[i].value, out_shape, |gv, yv| gv * yv * (1.0 - yv));
                self.acc(*a, t);
            }
            Op::Tanh(a) => {
                let t = zip_broadcast(g, &self.nodes[i].value, out_shape, |gv, yv| gv * (1.0 - yv * yv));
                self.acc(*a, t);
            }
            Op::Relu(a) => {
                let t = zip_broadcast(g, self.value(*a), out_shape, |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                self.acc(*a, t);
            }
            Op::Softplus(a) => {
                let t = zip_broadcast(g, self.value(*a), out_shape, |gv, xv| gv * sigmoid(xv));
                self.acc(*a, t);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.acc(*a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                self.acc(*a, Matrix::filled(r, c, g.item() / (r * c) as f64));
            }
            Op::SumCols(a) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    for j in 0..c {
                        ga.set(row, j, g.get(row, 0));
                    }
                }
                self.acc(*a, ga);
            }
            Op::MeanRows(a) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    for j in 0..c {
                        ga.set(row, j, g.get(0, j) / r as f64);
                    }
                }
                self.acc(*a, ga);
            }
            Op::MaxCols(a, arg) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (row, &j) in arg.iter().enumerate() {
                    ga.set(row, j, g.get(row, 0));
                }
                self.acc(*a, ga);
            }
            Op::Gather(a, index) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (k, &src) in index.iter().enumerate() {
                    ga.data_mut()[src] += g.data()[k];
                }
                self.acc(*a, ga);
            }
            Op::ScatterAdd(a, target) => {
                let (r, c) = self.shape(*a);
                let data: Vec<f64> = target.iter().map(|&t| g.data()[t]).collect();
                self.acc(*a, Matrix::from_vec(r, c, data).expect("scatter shape"));
            }
        }
    }

    /// Parameter gradients recorded by the last backward sweep.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &Matrix)> + '_ {
        self.nodes.iter().filter_map(|n| match (n.param, &n.grad) {
            (Some(id), Some(g)) => Some((id, g)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(Matrix::row(&[0.0, 0.0]));
        let y = g.softmax_row(x);
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn matmul_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Matrix::zeros(2, 3));
        let b = g.constant(Matrix::zeros(3, 2));
        let c = g.constant(Matrix::zeros(2, 2));
        assert_eq!({ let v = g.matmul(a, b).unwrap(); g.shape(v) }, (2, 2));
        let err = g.matmul(a, c).unwrap_err();
        assert_eq!(err.left, (2, 3));
        assert_eq!(err.right, (2, 2));
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let mut g = Graph::new();
        let x = g.variable(Matrix::row(&[1.0, 2.0]));
        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_twice_is_a_state_error() {
        let mut g = Graph::new();
        let x = g.variable(Matrix::scalar(3.0));
        let y = g.scale(x, 2.0);
        g.backward(y).unwrap();
        assert!(matches!(g.backward(y), Err(AutodiffError::State(_))));
        g.reset();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 2.0);
    }

    #[test]
    fn constant_loss_leaves_zero_or_no_grad() {
        let mut g = Graph::new();
        let x = g.variable(Matrix::row(&[1.0, 2.0]));
        let c = g.constant(Matrix::scalar(5.0));
        let l = g.scale(c, 1.0);
        g.backward(l).unwrap();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn each_record_visited_once() {
        let mut g = Graph::new();
        let x = g.variable(Matrix::row(&[0.3, -0.2, 0.9]));
        let a = g.tanh(x);
        let b = g.mul(a, x).unwrap();
        let c = g.add(b, a).unwrap();
        let l = g.sum(c);
        g.backward(l).unwrap();
        assert!(g.visit_counts().iter().all(|&v| v <= 1));
        assert_eq!(g.visit_counts().iter().sum::<u32>(), 5);
    }

    #[test]
    fn broadcast_rules() {
        let mut g = Graph::new();
        let m = g.constant(Matrix::zeros(3, 4));
        let s = g.constant(Matrix::scalar(1.0));
        let row = g.constant(Matrix::zeros(1, 4));
        let col = g.constant(Matrix::zeros(3, 1));
        let bad = g.constant(Matrix::zeros(2, 4));
        assert_eq!({ let v = g.add(m, s).unwrap(); g.shape(v) }, (3, 4));
        assert_eq!({ let v = g.mul(s, m).unwrap(); g.shape(v) }, (3, 4));
        assert_eq!({ let v = g.sub(m, row).unwrap(); g.shape(v) }, (3, 4));
        assert_eq!({ let v = g.div(m, col).unwrap(); g.shape(v) }, (3, 4));
        assert!(g.add(m, bad).is_err());
    }
}
