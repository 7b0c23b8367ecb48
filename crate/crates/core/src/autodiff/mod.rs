//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records each operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar sweeps the record in reverse and leaves
//! `∂loss/∂v` on every node that requires a gradient. Trainable weights live in
//! a [`ParamStore`] and are brought into a graph with [`Graph::param`].

pub mod check;
mod graph;
mod params;
mod tensor;

pub use graph::{Graph, OpTag, Var};
pub use params::{AdamConfig, ParamId, ParamStore};
pub use tensor::Matrix;

#[allow(unused_imports)]
pub(crate) use graph::{sigmoid, softplus};

/// Operand shapes are incompatible with an operation.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch in {op}: {left:?} vs {right:?}")]
pub struct ShapeError {
    pub op: &'static str,
    pub left: (usize, usize),
    pub right: (usize, usize),
}

impl ShapeError {
    pub fn new(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        ShapeError { op, left, right }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid state: {0}")]
    State(&'static str),
}

/// `KL(p ‖ q) = Σ p·(log(p+eps) − log(q+eps))` over 1×n distributions.
///
/// Both inputs must sum to 1 within `1e-6`; anything else is a domain error.
pub fn kl_divergence(g: &mut Graph, p: Var, q: Var, eps: f64) -> Result<Var, AutodiffError> {
    if g.shape(p) != g.shape(q) {
        return Err(ShapeError::new("kl_divergence", g.shape(p), g.shape(q)).into());
    }
    for v in [p, q] {
        let m = g.value(v);
        if m.data().iter().any(|x| *x < 0.0 || !x.is_finite()) || libm::fabs(m.sum() - 1.0) > 1e-6 {
            return Err(AutodiffError::Domain("kl_divergence expects probability distributions"));
        }
    }
    let pe = g.add_scalar(p, eps);
    let qe = g.add_scalar(q, eps);
    let lp = g.log(pe);
    let lq = g.log(qe);
    let d = g.sub(lp, lq)?;
    let t = g.mul(p, d)?;
    Ok(g.sum(t))
}

/// `KL(p ‖ q) + KL(q ‖ p)`.
pub fn symmetric_kl(g: &mut Graph, p: Var, q: Var, eps: f64) -> Result<Var, AutodiffError> {
    let a = kl_divergence(g, p, q, eps)?;
    let b = kl_divergence(g, q, p, eps)?;
    Ok(g.add(a, b)?)
}
