//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes in row-major order.

use std::path::Path;

use mtoc_core::data::ImageSet;
use mtoc_core::tasks::DatasetName;

use crate::error::{DataError, Result};
use crate::idx::read_maybe_gz;

pub const RECORD: usize = 1 + 3 * 1024;

/// Appends the records of one batch to `pixels` (interleaved `H x W x C`)
/// and `labels`.
pub fn parse_batch(
    bytes: &[u8],
    path: &Path,
    pixels: &mut Vec<u8>,
    labels: &mut Vec<u8>,
) -> Result<()> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD) {
        return Err(DataError::Format {
            path: path.to_path_buf(),
            msg: format!(
                "{} bytes is not a positive multiple of {RECORD}",
                bytes.len()
            ),
        });
    }
    for (index, rec) in bytes.chunks_exact(RECORD).enumerate() {
        if rec[0] > 9 {
            return Err(DataError::Value {
                path: path.to_path_buf(),
                index,
                label: rec[0],
            });
        }
        labels.push(rec[0]);
        let planes = &rec[1..];
        for p in 0..1024 {
            pixels.extend_from_slice(&[planes[p], planes[1024 + p], planes[2048 + p]]);
        }
    }
    Ok(())
}

pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<ImageSet> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        parse_batch(&read_maybe_gz(path)?, path, &mut pixels, &mut labels)?;
    }
    Ok(ImageSet::new(
        DatasetName::Cifar10,
        [32, 32, 3],
        pixels,
        labels,
    )?)
}

/// One record in file order from interleaved pixels.
pub fn encode_record(label: u8, hwc: &[u8]) -> Vec<u8> {
    let mut rec = Vec::with_capacity(RECORD);
    rec.push(label);
    for c in 0..3 {
        rec.extend((0..1024).map(|p| hwc[p * 3 + c]));
    }
    rec
}
