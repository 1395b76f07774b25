//! Checkpoints: a JSON manifest next to one little-endian f64 file per tensor.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NeuralError, Parameters, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: String,
    pub hyperparameters: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

fn blob_name(stem: &str, tensor: &str) -> String {
    format!("{stem}.{tensor}.f64")
}

fn io(e: std::io::Error) -> NeuralError {
    NeuralError::Checkpoint(e.to_string())
}

pub fn encode_f64_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64_le(bytes: &[u8]) -> Result<Vec<f64>, NeuralError> {
    if bytes.len() % 8 != 0 {
        return Err(NeuralError::Checkpoint(format!("blob length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Writes `<stem>.json` and the tensor blobs into `dir`; returns the manifest path.
pub fn save_checkpoint<M: Parameters>(model: &M, dir: &Path, stem: &str) -> Result<PathBuf, NeuralError> {
    fs::create_dir_all(dir).map_err(io)?;
    let mut tensors = Vec::new();
    let groups = [(true, model.trainable()), (false, model.buffers())];
    for (trainable, list) in groups {
        for (name, t) in list {
            let file = blob_name(stem, &name);
            fs::write(dir.join(&file), encode_f64_le(t.data())).map_err(io)?;
            tensors.push(TensorEntry { name, shape: t.shape().to_vec(), file, trainable });
        }
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        model: model.kind().to_string(),
        hyperparameters: model.hyperparameters(),
        tensors,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    fs::write(&path, text).map_err(io)?;
    Ok(path)
}

pub fn load_checkpoint<M: Parameters>(manifest_path: &Path) -> Result<M, NeuralError> {
    let text = fs::read_to_string(manifest_path).map_err(io)?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {}", manifest.format_version)));
    }
    let mut model = M::from_hyperparameters(&manifest.hyperparameters)?;
    if manifest.model != model.kind() {
        return Err(NeuralError::Checkpoint(format!("checkpoint holds `{}`, not `{}`", manifest.model, model.kind())));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut loaded = 0;
    for (name, slot) in model.trainable_mut() {
        assign(&manifest, dir, &name, slot)?;
        loaded += 1;
    }
    for (name, slot) in model.buffers_mut() {
        assign(&manifest, dir, &name, slot)?;
        loaded += 1;
    }
    if loaded != manifest.tensors.len() {
        return Err(NeuralError::Checkpoint("manifest lists unknown tensors".into()));
    }
    Ok(model)
}

fn assign(manifest: &CheckpointManifest, dir: &Path, name: &str, slot: &mut Tensor) -> Result<(), NeuralError> {
    let entry = manifest
        .tensors
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| NeuralError::Checkpoint(format!("missing tensor `{name}`")))?;
    if entry.shape != slot.shape() {
        return Err(NeuralError::ShapeMismatch(format!(
            "`{name}`: checkpoint shape {:?}, model shape {:?}",
            entry.shape,
            slot.shape()
        )));
    }
    let data = decode_f64_le(&fs::read(dir.join(&entry.file)).map_err(io)?)?;
    *slot = Tensor::new(entry.shape.clone(), data)?;
    Ok(())
}
