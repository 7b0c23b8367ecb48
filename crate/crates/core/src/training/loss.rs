use crate::autodiff::{symmetric_kl, Graph, Var};
use crate::dsl::NodePath;
use crate::executor::Trace;

use super::TrainError;

/// `KL(a ‖ b) + KL(b ‖ a)` between the denotations at `path_a` in `trace_a`
/// and `path_b` in `trace_b`, differentiable into both.
pub fn paired_loss(g: &mut Graph, trace_a: &Trace, path_a: &NodePath, trace_b: &Trace, path_b: &NodePath, eps: f64) -> Result<Var, TrainError> {
    let a = trace_a.get(path_a).ok_or_else(|| TrainError::MissingNode(path_a.clone()))?;
    let b = trace_b.get(path_b).ok_or_else(|| TrainError::MissingNode(path_b.clone()))?;
    if a.kind != b.kind || a.support != b.support {
        return Err(TrainError::KindMismatch { a: a.kind, b: b.kind });
    }
    Ok(symmetric_kl(g, a.var, b.var, eps)?)
}
