//! IDX reader (the MNIST container): big-endian magic and dimensions
//! followed by unsigned bytes. Files ending in `.gz` are decompressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated(format!("IDX header ends before byte {}", at + 4)))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic {
            expected: format!("{expected:#010x}"),
            found: bytes[..4].to_vec(),
        });
    }
    Ok(())
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Truncated(format!(
            "{n} images of {rows}x{cols} need {need} bytes, found {}",
            payload.len()
        )));
    }
    Ok((n, rows, cols, &payload[..need]))
}

pub fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    check_magic(bytes, LABELS_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::Truncated(format!(
            "{n} labels declared, {} bytes present",
            payload.len()
        )));
    }
    Ok(&payload[..n])
}

/// Builds a dataset from raw IDX bytes. Pixels are scaled by 1/255.
pub fn idx_from_bytes(images: &[u8], labels: &[u8], split: Split) -> Result<LabeledDataset> {
    let (n, rows, cols, pixels) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != n {
        return Err(Error::DatasetFormat(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    let data = pixels.iter().map(|&b| b as f32 / 255.0).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    LabeledDataset::new(Tensor::new(vec![n, 1, rows, cols], data)?, labels, split, classes)
}

/// Loads an IDX image/label pair. The split is `test` when the image file
/// name starts with `t10k`, `train` otherwise.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let split = match images_path.file_name().and_then(|f| f.to_str()) {
        Some(f) if f.starts_with("t10k") => Split::Test,
        _ => Split::Train,
    };
    let images = read_file(images_path)?;
    let labels = read_file(labels_path.as_ref())?;
    idx_from_bytes(&images, &labels, split)
}

/// Serializes a single-channel dataset back to IDX bytes (pixels rounded to
/// the nearest byte). Mainly used to build fixtures.
pub fn idx_to_bytes(data: &LabeledDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let [c, h, w] = data.image_shape();
    if c != 1 {
        return Err(Error::InvalidArgument("IDX holds single-channel images".into()));
    }
    let mut images = Vec::with_capacity(16 + data.len() * h * w);
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [data.len(), h, w] {
        images.extend_from_slice(&(d as u32).to_be_bytes());
    }
    images.extend(data.images().data().iter().map(|v| (v * 255.0).round() as u8));
    let mut labels = Vec::with_capacity(8 + data.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(data.len() as u32).to_be_bytes());
    labels.extend(data.labels().iter().map(|&l| l as u8));
    Ok((images, labels))
}
