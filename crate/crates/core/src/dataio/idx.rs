//! IDX file format: big-endian 4-byte magic, big-endian u32 dimensions,
//! then row-major unsigned bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Magic for 3-dimensional u8 image files.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic for 1-dimensional u8 label files.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Length("truncated IDX header".into()));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an IDX image file as an unlabeled dataset; pixel bytes are scaled
/// to `[0,1]` by dividing by 255.
pub fn load_idx(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&bytes, 4)? as usize;
    let rows = read_u32_be(&bytes, 8)? as usize;
    let cols = read_u32_be(&bytes, 12)? as usize;
    let dim = rows * cols;
    if dim == 0 {
        return Err(Error::Format("IDX image dimensions are zero".into()));
    }
    let payload = &bytes[16..];
    if payload.len() != n * dim {
        return Err(Error::Length(format!(
            "IDX payload: header declares {} bytes, file holds {}",
            n * dim,
            payload.len()
        )));
    }
    let features = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::from_parts(dim, features, vec![None; n])
}

/// Load an IDX label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(Error::Length(format!(
            "IDX labels: header declares {n} bytes, file holds {}",
            payload.len()
        )));
    }
    Ok(payload.iter().map(|&b| b as usize).collect())
}

/// Write an IDX image file from `[0,1]` features (`rows * cols` must equal
/// the feature dimension). Values are quantized back to bytes by rounding.
pub fn write_idx_images(path: &Path, ds: &Dataset, rows: usize, cols: usize) -> Result<()> {
    if rows * cols != ds.dim() {
        return Err(Error::Contract(format!(
            "rows*cols = {} does not match dim {}",
            rows * cols,
            ds.dim()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + ds.n() * ds.dim());
    bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(ds.n() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for id in 0..ds.n() {
        for &v in ds.features_of(id) {
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Write an IDX label file.
pub fn write_idx_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        if l > u8::MAX as usize {
            return Err(Error::Contract(format!("label {l} exceeds u8 range")));
        }
        bytes.push(l as u8);
    }
    fs::write(path, bytes)?;
    Ok(())
}
