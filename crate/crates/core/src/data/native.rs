//! Native dataset container: `AIRDATA\0` framing (see the model format)
//! with a JSON header, then f32 LE images and u32 LE labels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"AIRDATA\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    count: usize,
    image_shape: [usize; 3],
    class_count: usize,
    split: Split,
    images_length: u64,
    labels_length: u64,
    payload_length: u64,
    payload_crc32: u32,
}

pub fn dataset_to_bytes(data: &LabeledDataset) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    container::f32_le_bytes(data.images().data(), &mut payload);
    let images_length = payload.len() as u64;
    for &l in data.labels() {
        payload.extend_from_slice(&(l as u32).to_le_bytes());
    }
    let header = Header {
        count: data.len(),
        image_shape: data.image_shape(),
        class_count: data.class_count(),
        split: data.split(),
        images_length,
        labels_length: payload.len() as u64 - images_length,
        payload_length: payload.len() as u64,
        payload_crc32: crc32fast::hash(&payload),
    };
    let header = serde_json::to_vec(&header)?;
    Ok(container::frame(MAGIC, VERSION, &header, &payload))
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<LabeledDataset> {
    let (header, payload) = container::unframe(MAGIC, VERSION, bytes)?;
    let h: Header = serde_json::from_slice(header).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    container::check_payload(payload, h.payload_length, h.payload_crc32)?;
    let [c, hh, w] = h.image_shape;
    let numel = h.count * c * hh * w;
    if h.images_length != numel as u64 * 4
        || h.labels_length != h.count as u64 * 4
        || h.images_length + h.labels_length != h.payload_length
    {
        return Err(Error::MalformedHeader("section lengths disagree with count".into()));
    }
    let split_at = h.images_length as usize;
    let images = container::f32_from_le(&payload[..split_at]);
    let labels = payload[split_at..]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    LabeledDataset::new(Tensor::new(vec![h.count, c, hh, w], images)?, labels, h.split, h.class_count)
}

pub fn save_dataset(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    container::write_atomic(path.as_ref(), &dataset_to_bytes(data)?)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    dataset_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_synthetic;

    #[test]
    fn roundtrip_and_checksum() {
        let d = make_synthetic(3, 4, [2, 5, 5], 1, Split::Test).unwrap();
        let bytes = dataset_to_bytes(&d).unwrap();
        assert_eq!(dataset_from_bytes(&bytes).unwrap(), d);
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 5] ^= 1;
        assert!(matches!(dataset_from_bytes(&bad), Err(Error::ChecksumMismatch { .. })));
        assert!(matches!(dataset_from_bytes(&bytes[..n - 2]), Err(Error::Truncated(_))));
        assert!(matches!(
            dataset_from_bytes(b"AIRMODEL\x01\0\0\0"),
            Err(Error::BadMagic { .. })
        ));
    }
}
