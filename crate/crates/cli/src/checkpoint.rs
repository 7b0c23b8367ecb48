//! Model checkpoints: a JSON object with a format tag, the model
//! configuration, the vocabulary, the decoding temperature and every
//! parameter as `{shape, values}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{io, CliError};
use modpair_core::autodiff::Matrix;
use modpair_core::executor::{Model, ModelConfig, Vocab};
use modpair_core::training::snapshot;

pub const FORMAT: &str = "MODPAIR-CKPT-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelConfig,
    pub vocab: Vocab,
    /// Temperature the parameters were selected at.
    pub tau: f64,
    pub params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, tau: f64) -> Self {
        let params = snapshot(model)
            .into_iter()
            .map(|(name, m)| {
                let (r, c) = m.shape();
                (name, Tensor { shape: [r, c], values: m.data().to_vec() })
            })
            .collect();
        Checkpoint { format: FORMAT.to_string(), model: model.config.clone(), vocab: model.vocab.clone(), tau, params }
    }

    pub fn into_model(self) -> Result<(Model, f64), CliError> {
        if self.format != FORMAT {
            return Err(CliError::invalid(format!("unsupported checkpoint format `{}`", self.format)));
        }
        let mut values = BTreeMap::new();
        for (name, t) in self.params {
            let m = Matrix::from_vec(t.shape[0], t.shape[1], t.values)
                .map_err(|e| CliError::invalid(format!("parameter `{name}`: {e}")))?;
            values.insert(name, m);
        }
        let mut model = Model::new(self.model, self.vocab, 0).map_err(|e| CliError::invalid(e.to_string()))?;
        model.load_values(&values).map_err(|e| CliError::invalid(format!("checkpoint does not fit the model: {e}")))?;
        Ok((model, self.tau))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        io::read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        io::write_json(path, self)
    }
}
