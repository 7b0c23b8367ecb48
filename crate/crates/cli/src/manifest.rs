use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{io, CliError};

/// Record of one successful command, written beside its primary output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    /// Not part of the deterministic output; compare manifests without it.
    pub wall_time_secs: f64,
}

pub struct Recorder {
    command: String,
    started: Instant,
    config_hash: String,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn start(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            started: Instant::now(),
            config_hash: String::new(),
            seed: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, hash: String) {
        self.config_hash = hash;
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), io::sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes the manifest to `path` and returns it.
    pub fn finish(self, path: &Path) -> Result<RunManifest, CliError> {
        let m = RunManifest {
            command: self.command,
            config_hash: self.config_hash,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        io::write_json(path, &m)?;
        Ok(m)
    }
}

/// `out.jsonl` -> `out.jsonl.run.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}
