use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::graph::Graph;
use super::tensor::Matrix;
use super::{AutodiffError, ShapeError};

/// Index of a parameter in its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: None }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Matrix,
    grad: Matrix,
    m: Matrix,
    v: Matrix,
}

/// Named trainable matrices with accumulated gradients and optimizer state.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
    has_grads: bool,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Matrix) -> Result<ParamId, AutodiffError> {
        if self.by_name.contains_key(name) {
            return Err(AutodiffError::State("parameter name registered twice"));
        }
        let (r, c) = value.shape();
        let id = self.entries.len();
        self.entries.push(Entry {
            name: String::from(name),
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
        });
        self.by_name.insert(String::from(name), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Matrix> {
        self.has_grads.then(|| &self.entries[id.0].grad)
    }

    /// Replaces a value, e.g. when loading a checkpoint. Shapes must match.
    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<(), ShapeError> {
        let e = &mut self.entries[id.0];
        if e.value.shape() != value.shape() {
            return Err(ShapeError::new("set_value", e.value.shape(), value.shape()));
        }
        e.value = value;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Adds the parameter gradients from a graph's last backward sweep.
    pub fn accumulate(&mut self, graph: &Graph) {
        for (id, g) in graph.param_grads() {
            self.entries[id.0].grad.add_assign(g);
        }
        self.has_grads = true;
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        self.has_grads = false;
    }

    pub fn grad_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|e| e.grad.squared_norm()).sum())
    }

    /// `w ← w − lr·g`, then clears gradients.
    pub fn sgd_step(&mut self, lr: f64) -> Result<(), AutodiffError> {
        if !self.has_grads {
            return Err(AutodiffError::State("optimizer step without gradients"));
        }
        for e in &mut self.entries {
            for (w, g) in e.value.data_mut().iter_mut().zip(e.grad.data()) {
                *w -= lr * g;
            }
        }
        self.step += 1;
        self.zero_grad();
        Ok(())
    }

    /// One Adam update with bias correction, then clears gradients.
    /// Returns the gradient norm before clipping.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<f64, AutodiffError> {
        if !self.has_grads {
            return Err(AutodiffError::State("optimizer step without gradients"));
        }
        let norm = self.grad_norm();
        if !norm.is_finite() {
            return Err(AutodiffError::Domain("non-finite gradient"));
        }
        let scale = match cfg.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(cfg.beta1, t);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t);
        for e in &mut self.entries {
            let n = e.value.len();
            let (w, g, m, v) = (e.value.data_mut(), e.grad.data(), e.m.data_mut(), e.v.data_mut());
            for i in 0..n {
                let gi = g[i] * scale;
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                w[i] -= cfg.lr * mh / (libm::sqrt(vh) + cfg.eps);
            }
        }
        self.zero_grad();
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_grad(store: &mut ParamStore, id: ParamId) {
        // loss = w², so the gradient is 2w
        let mut g = Graph::new();
        let w = g.param(store, id);
        let sq = g.mul(w, w).unwrap();
        let l = g.sum(sq);
        g.backward(l).unwrap();
        store.accumulate(&g);
    }

    #[test]
    fn sgd_single_step() {
        let mut s = ParamStore::new();
        let id = s.register("w", Matrix::scalar(1.0)).unwrap();
        quadratic_grad(&mut s, id);
        s.sgd_step(0.1).unwrap();
        assert!((s.value(id).item() - 0.8).abs() < 1e-12);
        assert!(s.grad(id).is_none());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.register("w", Matrix::scalar(1.0)).unwrap();
        quadratic_grad(&mut s, id);
        s.adam_step(&AdamConfig::default()).unwrap();
        assert!((s.value(id).item() - (1.0 - 1e-3)).abs() < 1e-8);
    }

    #[test]
    fn step_without_grads_fails() {
        let mut s = ParamStore::new();
        s.register("w", Matrix::scalar(1.0)).unwrap();
        assert!(matches!(s.sgd_step(0.1), Err(AutodiffError::State(_))));
        assert!(matches!(s.adam_step(&AdamConfig::default()), Err(AutodiffError::State(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.register("w", Matrix::scalar(1.0)).unwrap();
        assert!(s.register("w", Matrix::scalar(2.0)).is_err());
    }

    #[test]
    fn shared_param_grads_accumulate() {
        let mut s = ParamStore::new();
        let id = s.register("w", Matrix::scalar(3.0)).unwrap();
        let mut g = Graph::new();
        let a = g.param(&s, id);
        let b = g.param(&s, id);
        assert_eq!(a, b);
        let y = g.add(a, b).unwrap();
        g.backward(y).unwrap();
        s.accumulate(&g);
        assert_eq!(s.grad(id).unwrap().item(), 2.0);
    }
}
