//! IDX (MNIST-style) binary format.
//!
//! Images: big-endian magic `0x00000803`, then item count, rows and columns
//! as `u32`, then `count * rows * cols` unsigned bytes. Labels: magic
//! `0x00000801`, item count, then one unsigned byte per item.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// One row per image, pixels scaled to [0, 1].
    pub pixels: Vec<Vec<f64>>,
    /// Item count declared in the header (before `limit`).
    pub declared: usize,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header at byte {offset}")))
}

/// Decode at most `limit` images.
pub fn parse_idx_images(bytes: &[u8], limit: usize) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic number {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let declared = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let dim = rows
        .checked_mul(cols)
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Format(format!("invalid image shape {rows}x{cols}")))?;
    let count = declared.min(limit);
    let payload = &bytes[16..];
    let needed = count
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("image payload size overflows".into()))?;
    if payload.len() < needed {
        return Err(Error::Format(format!(
            "truncated image payload: need {needed} bytes, have {}",
            payload.len()
        )));
    }
    let pixels = payload[..needed]
        .chunks_exact(dim)
        .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    Ok(IdxImages {
        rows,
        cols,
        pixels,
        declared,
    })
}

/// Decode at most `limit` labels.
pub fn parse_idx_labels(bytes: &[u8], limit: usize) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic number {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let declared = read_u32(bytes, 4)? as usize;
    let count = declared.min(limit);
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Format(format!(
            "truncated label payload: need {count} bytes, have {}",
            payload.len()
        )));
    }
    Ok(payload[..count].to_vec())
}

/// Load an image/label IDX pair as a binary dataset where items whose class
/// equals `positive_class` get label 1.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: usize,
    positive_class: u8,
) -> Result<LabeledDataset> {
    if limit == 0 {
        return Err(Error::invalid("limit must be at least 1"));
    }
    let ip = images_path.as_ref();
    let lp = labels_path.as_ref();
    let image_bytes = std::fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let label_bytes = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
    idx_pair_to_dataset(&image_bytes, &label_bytes, limit, positive_class)
}

pub(crate) fn idx_pair_to_dataset(
    image_bytes: &[u8],
    label_bytes: &[u8],
    limit: usize,
    positive_class: u8,
) -> Result<LabeledDataset> {
    let images = parse_idx_images(image_bytes, limit)?;
    let classes = parse_idx_labels(label_bytes, limit)?;
    if classes.len() != images.pixels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            images.pixels.len(),
            classes.len()
        )));
    }
    let labels = classes.iter().map(|&c| u8::from(c == positive_class)).collect();
    LabeledDataset::with_dim(images.pixels, labels, images.rows * images.cols)
}
