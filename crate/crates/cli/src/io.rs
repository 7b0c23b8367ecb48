//! JSON and JSONL files: line-numbered parse errors and atomic writes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;
use modpair_core::pairing::PairLink;
use modpair_core::world::{Dataset, SplitManifest, WorldInstance};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::invalid(format!("{}:{}:{}: {e}", path.display(), i + 1, e.column())))?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn encode<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    serde_json::to_string(value).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&encode(item)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Split manifest path of a dataset file: `data.jsonl` -> `data.split.json`.
pub fn split_path(data: &Path) -> PathBuf {
    data.with_extension("split.json")
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let worlds: Vec<WorldInstance> = read_jsonl(path)?;
    let manifest: SplitManifest = read_json(&split_path(path))?;
    for id in manifest.train.iter().chain(&manifest.dev).chain(&manifest.test) {
        if !worlds.iter().any(|w| &w.id == id) {
            return Err(CliError::invalid(format!("{}: unknown passage `{id}`", split_path(path).display())));
        }
    }
    Ok(Dataset { worlds, manifest })
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), CliError> {
    write_jsonl(path, &dataset.worlds)?;
    write_json(&split_path(path), &dataset.manifest)
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairLink>, CliError> {
    read_jsonl(path)
}
