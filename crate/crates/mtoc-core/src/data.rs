//! In-memory image sets, normalization and shuffled batching.
//!
//! Pixels stay as bytes until a batch is gathered, so a full training split
//! costs one byte per pixel.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tasks::{DatasetName, NUM_CLASSES};
use crate::tensor::Tensor;

/// One split of a dataset: raw pixels in `N x H x W x C` order plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub dataset: DatasetName,
    sample_shape: [usize; 3],
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(
        dataset: DatasetName,
        sample_shape: [usize; 3],
        pixels: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if per == 0 {
            return Err(Error::config("sample shape must be positive"));
        }
        if pixels.len() != per * labels.len() {
            return Err(Error::dim(
                "ImageSet pixels",
                &[labels.len() * per],
                &[pixels.len()],
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::input(format!("label {bad} out of range")));
        }
        Ok(ImageSet {
            dataset,
            sample_shape,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        self.sample_shape
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.sample_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// The first `n` samples (all of them if `n` is larger).
    pub fn truncate(&self, n: usize) -> ImageSet {
        let n = n.min(self.len());
        ImageSet {
            dataset: self.dataset,
            sample_shape: self.sample_shape,
            pixels: self.pixels[..n * self.sample_len()].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Normalized images `[k, H, W, C]` for the given sample indices.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor> {
        let n = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::input(format!(
                    "sample {i} out of range for {} samples",
                    self.len()
                )));
            }
            data.extend(self.image(i).iter().map(|&p| p as f64 / 255.0));
        }
        let [h, w, c] = self.sample_shape;
        Tensor::new(alloc::vec![indices.len(), h, w, c], data)
    }

    /// Normalized images for the contiguous range `start..end`.
    pub fn gather_range(&self, start: usize, end: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (start..end).collect();
        self.gather(&idx)
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// A train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: DatasetName,
    pub train: ImageSet,
    pub test: ImageSet,
}

impl Dataset {
    pub fn new(name: DatasetName, train: ImageSet, test: ImageSet) -> Result<Self> {
        if train.dataset != name || test.dataset != name {
            return Err(Error::config("split dataset names disagree"));
        }
        if train.sample_shape != name.image_shape() || test.sample_shape != name.image_shape() {
            return Err(Error::dim(
                "dataset sample shape",
                &name.image_shape(),
                &train.sample_shape,
            ));
        }
        Ok(Dataset { name, train, test })
    }

    pub fn class_names(&self) -> [&'static str; NUM_CLASSES] {
        self.name.class_names()
    }

    /// Errors unless the split sizes equal the official ones.
    pub fn check_official_sizes(&self) -> Result<()> {
        let (tr, te) = self.name.split_sizes();
        if self.train.len() != tr || self.test.len() != te {
            return Err(Error::dim(
                "official split sizes",
                &[tr, te],
                &[self.train.len(), self.test.len()],
            ));
        }
        Ok(())
    }
}

/// Maps values in `[0, 255]` to `[0, 1]`.
pub fn normalize(raw: &Tensor) -> Result<Tensor> {
    if let Some(&bad) = raw.data().iter().find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::input(format!("pixel value {bad} outside [0, 255]")));
    }
    Ok(raw.map(|v| v / 255.0))
}

pub fn normalize_bytes(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&p| p as f64 / 255.0).collect()
}

/// One epoch of shuffled sample indices cut into batches; the last batch
/// may be short.
pub fn epoch_batches<R: Rng + ?Sized>(
    len: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    if len == 0 {
        return Err(Error::state("cannot batch an empty dataset"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
