//! Shared framing for the native binary files: 8-byte magic, little-endian
//! `u32` version, `u64` header length, UTF-8 JSON header, raw payload. The
//! header carries the payload length and its CRC32.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) const PREAMBLE: usize = 8 + 4 + 8;

pub(crate) fn frame(magic: &[u8; 8], version: u32, header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    out
}

/// Splits a framed file into `(header, payload)` after checking magic and
/// version. Payload length and checksum are checked by [`check_payload`]
/// once the header has been decoded.
pub(crate) fn unframe<'a>(magic: &[u8; 8], version: u32, bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: bytes[..bytes.len().min(8)].to_vec(),
        });
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::Truncated("file ends inside the preamble".into()));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != version {
        return Err(Error::VersionMismatch {
            expected: version,
            found,
        });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let rest = &bytes[PREAMBLE..];
    if hlen > rest.len() as u64 {
        return Err(Error::Truncated(format!(
            "header declares {hlen} bytes, {} available",
            rest.len()
        )));
    }
    Ok(rest.split_at(hlen as usize))
}

pub(crate) fn check_payload(payload: &[u8], declared_len: u64, declared_crc: u32) -> Result<()> {
    if (payload.len() as u64) < declared_len {
        return Err(Error::Truncated(format!(
            "payload is {} bytes, header declares {declared_len}",
            payload.len()
        )));
    }
    if payload.len() as u64 > declared_len {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            payload.len() as u64 - declared_len
        )));
    }
    let actual = crc32fast::hash(payload);
    if actual != declared_crc {
        return Err(Error::ChecksumMismatch {
            expected: declared_crc,
            actual,
        });
    }
    Ok(())
}

/// Writes to a temporary sibling and renames over `path`, so readers never
/// observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn f32_le_bytes(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn f32_from_le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}
