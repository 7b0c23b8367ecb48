//! Joint question–passage encoder and the soft module implementations.
//!
//! [`Model::execute`] evaluates a program bottom-up on a [`Graph`], producing a
//! probability distribution at every node. Token-valued nodes are distributions
//! over passage tokens; `find-num`/`find-date` yield distributions over the
//! passage's numbers or dates; `count` over `0..=count_max`; arithmetic roots
//! over integer value bins.

mod answer;
mod encoder;
mod modules;
mod vocab;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, Matrix, ParamId, ParamStore, ShapeError, Var};
use crate::dsl::{NodePath, ValueType};
use crate::rng;
use crate::world::{ConfigError, QAExample, WorldInstance};

pub use answer::{answer_loss, decode, span_decode};
pub use encoder::Encoding;
pub use vocab::{numeral, Vocab, NUM, UNK};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("no argument span for string-argument node {0}")]
    MissingArgSpan(NodePath),
    #[error("node {0} needs passage numbers or dates, but the passage has none")]
    EmptySupport(NodePath),
    #[error("gold answer {gold} cannot be scored against a {found} root")]
    KindMismatch { gold: String, found: ValueType },
    #[error("parameter `{0}` missing or misshapen")]
    BadParam(String),
}

/// Architecture and module hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub max_positions: usize,
    /// Relative-position buckets on each side; farther offsets share a bucket.
    pub rel_radius: usize,
    /// Soft-argmax temperature, annealed linearly over training.
    pub tau_start: f64,
    pub tau_end: f64,
    /// Compare-gate temperature.
    pub tau_compare: f64,
    /// Count sharpening exponent.
    pub count_beta: f64,
    /// Span decoding keeps tokens above `span_alpha * max`.
    pub span_alpha: f64,
    /// Alignment score penalty between a token and numbers in other sentences.
    pub align_penalty: f64,
    pub count_max: usize,
    pub num_bins_lo: i64,
    pub num_bins_hi: i64,
    pub year_bins_lo: i64,
    pub year_bins_hi: i64,
    /// Breakpoints of the piecewise-linear count head over sharpened mass.
    pub count_knots: Vec<f64>,
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            max_positions: 256,
            rel_radius: 6,
            tau_start: 1.0,
            tau_end: 0.1,
            tau_compare: 1.0,
            count_beta: 2.0,
            span_alpha: 0.1,
            align_penalty: 12.0,
            count_max: 9,
            num_bins_lo: -80,
            num_bins_hi: 160,
            year_bins_lo: 0,
            year_bins_hi: 650,
            count_knots: alloc::vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0],
            init_scale: 1.0,
        }
    }
}

fn parse<T: core::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::new(key, format!("cannot parse `{v}`")))
}

impl ModelConfig {
    pub const KEYS: [&'static str; 10] = [
        "dim",
        "max_positions",
        "rel_radius",
        "tau_start",
        "tau_end",
        "tau_compare",
        "count_beta",
        "span_alpha",
        "align_penalty",
        "init_scale",
    ];

    /// Sets one field from its `key=value` form; returns `false` for keys that
    /// are not model keys.
    pub fn apply(&mut self, key: &str, v: &str) -> Result<bool, ConfigError> {
        match key {
            "dim" => self.dim = parse(key, v)?,
            "max_positions" => self.max_positions = parse(key, v)?,
            "rel_radius" => self.rel_radius = parse(key, v)?,
            "tau_start" => self.tau_start = parse(key, v)?,
            "tau_end" => self.tau_end = parse(key, v)?,
            "tau_compare" => self.tau_compare = parse(key, v)?,
            "count_beta" => self.count_beta = parse(key, v)?,
            "span_alpha" => self.span_alpha = parse(key, v)?,
            "align_penalty" => self.align_penalty = parse(key, v)?,
            "init_scale" => self.init_scale = parse(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim == 0 || self.dim > 512 {
            return Err(ConfigError::new("dim", "must lie in 1..=512"));
        }
        if self.max_positions < 16 {
            return Err(ConfigError::new("max_positions", "must be at least 16"));
        }
        for (k, v) in [("tau_start", self.tau_start), ("tau_end", self.tau_end), ("tau_compare", self.tau_compare)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(k, "temperatures must be positive"));
            }
        }
        if !(self.count_beta > 0.0) {
            return Err(ConfigError::new("count_beta", "must be positive"));
        }
        if !(self.span_alpha > 0.0 && self.span_alpha <= 1.0) {
            return Err(ConfigError::new("span_alpha", "must lie in (0, 1]"));
        }
        if self.num_bins_lo >= self.num_bins_hi || self.year_bins_lo >= self.year_bins_hi {
            return Err(ConfigError::new("num_bins_lo", "bin ranges must be non-empty"));
        }
        Ok(())
    }

    /// Temperature after `progress` ∈ [0, 1] of training.
    pub fn tau_at(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.tau_start + (self.tau_end - self.tau_start) * p
    }

    fn rel_buckets(&self) -> usize {
        4 * self.rel_radius + 3
    }
}

/// Per-call execution settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecOptions {
    pub tau: f64,
}

/// What a denotation's entries index.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Tokens(usize),
    Numbers(Vec<i64>),
    Dates(Vec<i64>),
    Counts(usize),
    Bins { lo: i64, len: usize },
}

impl Support {
    pub fn len(&self) -> usize {
        match self {
            Support::Tokens(n) | Support::Counts(n) => *n,
            Support::Numbers(v) | Support::Dates(v) => v.len(),
            Support::Bins { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A node's output: a 1×n distribution recorded in a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Denotation {
    pub kind: ValueType,
    pub var: Var,
    pub support: Support,
}

/// Denotations of every node of one executed program.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub nodes: BTreeMap<NodePath, Denotation>,
}

impl Trace {
    pub fn root(&self) -> &Denotation {
        &self.nodes[&NodePath::root()]
    }

    pub fn get(&self, path: &NodePath) -> Option<&Denotation> {
        self.nodes.get(path)
    }
}

/// Passage facts the modules read: number/date positions and sentence ids.
#[derive(Clone, Debug)]
pub struct WorldIndex {
    pub number_tokens: Vec<usize>,
    pub number_values: Vec<i64>,
    pub date_tokens: Vec<usize>,
    pub date_years: Vec<i64>,
    pub sentence: Vec<usize>,
}

impl WorldIndex {
    pub fn new(world: &WorldInstance) -> Self {
        WorldIndex {
            number_tokens: world.numbers.iter().map(|(t, _)| *t).collect(),
            number_values: world.numbers.iter().map(|(_, v)| *v).collect(),
            date_tokens: world.dates.iter().map(|(t, _)| *t).collect(),
            date_years: world.dates.iter().map(|(_, d)| i64::from(d.year)).collect(),
            sentence: world.sentence_ids(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Ids {
    tok: ParamId,
    pos: ParamId,
    seg: ParamId,
    num_feat: ParamId,
    year_feat: ParamId,
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    rel: ParamId,
    find: ParamId,
    filter_w: ParamId,
    filter_b: ParamId,
    project: ParamId,
    align_num: ParamId,
    align_date: ParamId,
    count_slopes: ParamId,
    count_bias: ParamId,
    count_gamma: ParamId,
}

/// Parameters, vocabulary and hyperparameters of one executor.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ParamStore,
    ids: Ids,
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

impl Model {
    /// Freshly initialized parameters drawn from `seed`.
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Model, ExecError> {
        config.validate().map_err(|e| ExecError::BadParam(format!("{e}")))?;
        let mut r = rng::rng(rng::stream(seed, "init"));
        let d = config.dim;
        let s = config.init_scale;
        let glorot = |fan_in: usize, fan_out: usize| s * libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let mut p = ParamStore::new();
        let reg = |p: &mut ParamStore, name: &str, m: Matrix| p.register(name, m).map_err(ExecError::from);
        let emb = s * 0.5;
        let tok = reg(&mut p, "embed.token", uniform(&mut r, vocab.len(), d, emb))?;
        let pos = reg(&mut p, "embed.position", uniform(&mut r, config.max_positions, d, emb * 0.5))?;
        let seg = reg(&mut p, "embed.segment", uniform(&mut r, 2, d, emb))?;
        let num_feat = reg(&mut p, "embed.number", uniform(&mut r, 1, d, emb))?;
        let year_feat = reg(&mut p, "embed.year", uniform(&mut r, 1, d, emb))?;
        let wq = reg(&mut p, "attn.query", uniform(&mut r, d, d, glorot(d, d)))?;
        let wk = reg(&mut p, "attn.key", uniform(&mut r, d, d, glorot(d, d)))?;
        let wv = reg(&mut p, "attn.value", uniform(&mut r, d, d, glorot(d, d)))?;
        let wo = reg(&mut p, "attn.output", uniform(&mut r, d, d, glorot(d, d)))?;
        let rel = reg(&mut p, "attn.relative", Matrix::zeros(1, config.rel_buckets()))?;
        let find = reg(&mut p, "find.bilinear", uniform(&mut r, d, d, glorot(d, d)))?;
        let filter_w = reg(&mut p, "filter.bilinear", uniform(&mut r, d, d, glorot(d, d)))?;
        let filter_b = reg(&mut p, "filter.bias", Matrix::scalar(1.0))?;
        let project = reg(&mut p, "project.bilinear", uniform(&mut r, 2 * d, d, glorot(2 * d, d)))?;
        let align_num = reg(&mut p, "align.number", uniform(&mut r, d, d, glorot(d, d)))?;
        let align_date = reg(&mut p, "align.date", uniform(&mut r, d, d, glorot(d, d)))?;
        let k = config.count_knots.len();
        let count_slopes = reg(&mut p, "count.slopes", Matrix::filled(1, k, -3.0))?;
        let count_bias = reg(&mut p, "count.bias", Matrix::scalar(0.0))?;
        let count_gamma = reg(&mut p, "count.gamma", Matrix::scalar(0.0))?;
        let ids = Ids {
            tok,
            pos,
            seg,
            num_feat,
            year_feat,
            wq,
            wk,
            wv,
            wo,
            rel,
            find,
            filter_w,
            filter_b,
            project,
            align_num,
            align_date,
            count_slopes,
            count_bias,
            count_gamma,
        };
        Ok(Model { config, vocab, params: p, ids })
    }

    /// Replaces every parameter value by name, e.g. from a checkpoint.
    pub fn load_values(&mut self, values: &BTreeMap<String, Matrix>) -> Result<(), ExecError> {
        let ids: Vec<ParamId> = self.params.ids().collect();
        for id in ids {
            let name = String::from(self.params.name(id));
            let m = values.get(&name).ok_or_else(|| ExecError::BadParam(name.clone()))?;
            self.params.set_value(id, m.clone()).map_err(|_| ExecError::BadParam(name.clone()))?;
        }
        if values.len() != self.params.len() {
            return Err(ExecError::BadParam(String::from("unexpected extra parameters")));
        }
        Ok(())
    }

    /// Evaluates `example.program` bottom-up, returning every node's denotation.
    pub fn execute(
        &self,
        g: &mut Graph,
        example: &QAExample,
        world: &WorldInstance,
        index: &WorldIndex,
        opts: &ExecOptions,
    ) -> Result<Trace, ExecError> {
        self.execute_overriding(g, example, world, index, opts, None)
    }

    /// Like [`Model::execute`], but nodes listed in `overrides` output the
    /// given fixed `1×|p|` token distribution instead of being evaluated.
    pub fn execute_overriding(
        &self,
        g: &mut Graph,
        example: &QAExample,
        world: &WorldInstance,
        index: &WorldIndex,
        opts: &ExecOptions,
        overrides: Option<&BTreeMap<NodePath, Matrix>>,
    ) -> Result<Trace, ExecError> {
        let enc = self.encode(g, &example.question_tokens, &world.passage_tokens)?;
        let mut ctx = modules::Ctx::new(self, g, &enc, example, index, *opts, overrides);
        let mut trace = Trace::default();
        ctx.eval(&example.program.root, NodePath::root(), &mut trace)?;
        Ok(trace)
    }

    pub fn encode(&self, g: &mut Graph, question: &[String], passage: &[String]) -> Result<Encoding, ExecError> {
        encoder::encode(self, g, question, passage)
    }
}
