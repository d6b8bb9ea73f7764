//! Model checkpoint container: a length-prefixed UTF-8 JSON manifest
//! (layer specs, tensor names and shapes, seed, epoch, metrics) followed by
//! the raw tensor data in manifest order as little-endian f32.

use super::chain::Chain;
use super::layer::{LayerSpec, ParamSet};
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::TensorError;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointManifest {
    pub format_version: u16,
    pub seed: u64,
    pub epoch: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// Blob order; names are `L<index>.<param>`.
    pub tensors: Vec<TensorEntry>,
    /// Free-form training metrics (validation loss, pf, pd per SNR, ...).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub metrics: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl CheckpointManifest {
    pub fn chain(&self) -> Result<Chain, TensorError> {
        Chain::new(self.input_shape.clone(), self.layers.clone())
    }
}

fn tensor_name(layer: usize, param: &str) -> String {
    format!("L{layer:02}.{param}")
}

/// Serialize a chain's parameters with training metadata.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    chain: &Chain,
    params: &[ParamSet<T>],
    seed: u64,
    epoch: u32,
    metrics: serde_json::Value,
    config_hash: Option<String>,
) -> Result<(), TensorError> {
    let mut tensors = Vec::new();
    for (l, layer_params) in params.iter().enumerate() {
        for (name, tensor) in layer_params.iter() {
            tensors.push(TensorEntry {
                name: tensor_name(l, name),
                shape: tensor.shape().to_vec(),
            });
        }
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        seed,
        epoch,
        input_shape: chain.input_shape().to_vec(),
        layers: chain.layers().to_vec(),
        tensors,
        metrics,
        config_hash,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    for layer_params in params {
        for (_, tensor) in layer_params.iter() {
            for v in tensor.data() {
                w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint back into parameters of element type `T`.
pub fn load_checkpoint<T: Scalar>(
    path: &Path,
) -> Result<(CheckpointManifest, Vec<ParamSet<T>>), TensorError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let manifest_len = u32::from_le_bytes(len) as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes)?;
    let manifest: CheckpointManifest = serde_json::from_slice(&manifest_bytes)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(TensorError::MalformedCheckpoint(format!(
            "unsupported version {}",
            manifest.format_version
        )));
    }

    let mut params: Vec<ParamSet<T>> = (0..manifest.layers.len())
        .map(|_| ParamSet::empty())
        .collect();
    for entry in &manifest.tensors {
        let (layer, param) = parse_tensor_name(&entry.name)?;
        if layer >= params.len() {
            return Err(TensorError::MalformedCheckpoint(format!(
                "tensor {} references layer {layer} beyond chain",
                entry.name
            )));
        }
        let count: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            data.push(T::from_f64(f32::from_le_bytes(buf) as f64));
        }
        params[layer].insert(&param, Tensor::from_vec(&entry.shape, data)?);
    }
    Ok((manifest, params))
}

fn parse_tensor_name(name: &str) -> Result<(usize, String), TensorError> {
    let bad = || TensorError::MalformedCheckpoint(format!("bad tensor name {name}"));
    let rest = name.strip_prefix('L').ok_or_else(bad)?;
    let (idx, param) = rest.split_once('.').ok_or_else(bad)?;
    Ok((idx.parse().map_err(|_| bad())?, param.to_string()))
}
