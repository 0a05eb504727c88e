//! The `AIRMODEL` file format.
//!
//! ```text
//! "AIRMODEL"            8 bytes
//! version               u32 LE (= 1)
//! header length         u64 LE
//! header                UTF-8 JSON: arch, layers, tensor index, metadata, CRC32
//! blob                  f32 LE tensors, in tensor-index order
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Model;
use crate::container;
use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"AIRMODEL";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch_name: String,
    depth: usize,
    input_shape: Vec<usize>,
    num_classes: usize,
    layers: Vec<LayerSpec>,
    tensors: Vec<TensorEntry>,
    frozen: Vec<String>,
    metadata: BTreeMap<String, Value>,
    blob_length: u64,
    blob_crc32: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: u64,
    /// Byte length.
    length: u64,
}

pub fn model_to_bytes(model: &Model) -> Result<Vec<u8>> {
    model.validate()?;
    let mut blob = Vec::new();
    let mut tensors = Vec::with_capacity(model.weights.len());
    for (name, t) in &model.weights {
        let offset = blob.len() as u64;
        container::f32_le_bytes(t.data(), &mut blob);
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
            length: blob.len() as u64 - offset,
        });
    }
    let header = Header {
        arch_name: model.arch_name.clone(),
        depth: model.depth,
        input_shape: model.input_shape.clone(),
        num_classes: model.num_classes,
        layers: model.layers.clone(),
        tensors,
        frozen: model.frozen.iter().cloned().collect(),
        metadata: model.metadata.clone(),
        blob_length: blob.len() as u64,
        blob_crc32: crc32fast::hash(&blob),
    };
    let header = serde_json::to_vec(&header)?;
    Ok(container::frame(MAGIC, VERSION, &header, &blob))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    let (header, blob) = container::unframe(MAGIC, VERSION, bytes)?;
    let header: Header =
        serde_json::from_slice(header).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    container::check_payload(blob, header.blob_length, header.blob_crc32)?;
    let mut weights = BTreeMap::new();
    for entry in header.tensors {
        let numel: usize = entry.shape.iter().product();
        let end = entry.offset.checked_add(entry.length);
        if entry.length != numel as u64 * 4 || end.is_none_or(|e| e > blob.len() as u64) {
            return Err(Error::MalformedHeader(format!(
                "tensor `{}` has an inconsistent extent",
                entry.name
            )));
        }
        let data =
            container::f32_from_le(&blob[entry.offset as usize..(entry.offset + entry.length) as usize]);
        if weights
            .insert(entry.name.clone(), Tensor::new(entry.shape, data)?)
            .is_some()
        {
            return Err(Error::MalformedHeader(format!("duplicate tensor `{}`", entry.name)));
        }
    }
    let model = Model {
        arch_name: header.arch_name,
        depth: header.depth,
        input_shape: header.input_shape,
        num_classes: header.num_classes,
        layers: header.layers,
        weights,
        frozen: header.frozen.into_iter().collect(),
        metadata: header.metadata,
    };
    model.validate()?;
    Ok(model)
}

/// Writes atomically (temporary file + rename).
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let bytes = model_to_bytes(model)?;
    container::write_atomic(path.as_ref(), &bytes)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
