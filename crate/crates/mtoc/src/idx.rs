//! IDX files (the MNIST and Fashion-MNIST distribution format), plain or
//! gzip-compressed.
//!
//! Header: two zero bytes, a type code (0x08 = unsigned byte), the number of
//! dimensions, then one big-endian u32 per dimension.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use mtoc_core::data::ImageSet;
use mtoc_core::tasks::DatasetName;

use crate::error::{DataError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, inflating it first if it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let io = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = std::fs::read(path).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], magic: u32, path: &Path) -> Result<Vec<usize>> {
    let dims = (magic & 0xff) as usize;
    let head = 4 + 4 * dims;
    if bytes.len() < 4 {
        return Err(DataError::Length {
            path: path.to_path_buf(),
            expected: head,
            found: bytes.len(),
        });
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(DataError::Format {
            path: path.to_path_buf(),
            msg: format!("magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    if bytes.len() < head {
        return Err(DataError::Length {
            path: path.to_path_buf(),
            expected: head,
            found: bytes.len(),
        });
    }
    let shape: Vec<usize> = bytes[4..head]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let expected = head + shape.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(DataError::Length {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(shape)
}

/// `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let shape = header(bytes, IMAGES_MAGIC, path)?;
    Ok((shape[0], shape[1], shape[2], bytes[16..].to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    header(bytes, LABELS_MAGIC, path)?;
    let labels = bytes[8..].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(DataError::Value {
            path: path.to_path_buf(),
            index,
            label,
        });
    }
    Ok(labels)
}

/// Images as `N x rows x cols x 1` bytes with their labels.
pub fn load_idx(dataset: DatasetName, image_path: &Path, label_path: &Path) -> Result<ImageSet> {
    let (n, rows, cols, pixels) = parse_images(&read_maybe_gz(image_path)?, image_path)?;
    let labels = parse_labels(&read_maybe_gz(label_path)?, label_path)?;
    if labels.len() != n {
        return Err(DataError::Consistency {
            images: n,
            labels: labels.len(),
        });
    }
    Ok(ImageSet::new(dataset, [rows, cols, 1], pixels, labels)?)
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols);
    let mut out = IMAGES_MAGIC.to_be_bytes().to_vec();
    for d in [n, rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = LABELS_MAGIC.to_be_bytes().to_vec();
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
