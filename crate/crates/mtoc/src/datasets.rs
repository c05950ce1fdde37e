//! Dataset files on disk, their recorded hashes, and loading a full
//! train/test pair.
//!
//! Layout below the data directory:
//!
//! ```text
//! mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]
//! fashion/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]
//! cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin[.gz]
//! ```
//!
//! Hashes are SHA-256 of the uncompressed bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mtoc_core::data::{Dataset, ImageSet};
use mtoc_core::tasks::DatasetName;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cifar;
use crate::error::{DataError, Result};
use crate::idx::{self, read_maybe_gz};

pub const DATA_DIR_ENV: &str = "MTOC_DATA_DIR";

const EMBEDDED_MANIFEST: &str = include_str!("../manifest/sha256.txt");

/// Explicit path, else `$MTOC_DATA_DIR`, else `data/` at the workspace root.
pub fn resolve_data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(DATA_DIR_ENV) {
        return PathBuf::from(p);
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Expected hashes keyed by path relative to the data directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HashManifest {
    entries: BTreeMap<String, String>,
}

impl HashManifest {
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED_MANIFEST)
    }

    /// `sha256sum` format; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let (hash, path) = l.split_once(char::is_whitespace)?;
                Some((
                    path.trim().trim_start_matches('*').to_string(),
                    hash.to_ascii_lowercase(),
                ))
            })
            .collect();
        HashManifest { entries }
    }

    pub fn expected(&self, rel: &str) -> Option<&str> {
        self.entries.get(rel).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    /// False when the manifest has no entry for the file.
    pub verified: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Relative file names of the (train, test) splits.
pub fn split_files(name: DatasetName) -> (Vec<String>, Vec<String>) {
    match name {
        DatasetName::Mnist | DatasetName::FashionMnist => {
            let dir = if name == DatasetName::Mnist {
                "mnist"
            } else {
                "fashion"
            };
            let f = |s: &str| format!("{dir}/{s}");
            (
                vec![f("train-images-idx3-ubyte"), f("train-labels-idx1-ubyte")],
                vec![f("t10k-images-idx3-ubyte"), f("t10k-labels-idx1-ubyte")],
            )
        }
        DatasetName::Cifar10 => (
            (1..=5)
                .map(|i| format!("cifar-10-batches-bin/data_batch_{i}.bin"))
                .collect(),
            vec!["cifar-10-batches-bin/test_batch.bin".to_string()],
        ),
    }
}

/// Reads `rel` (or `rel.gz`), hashes the uncompressed bytes and checks them
/// against the manifest.
pub fn read_verified(
    dir: &Path,
    rel: &str,
    manifest: &HashManifest,
) -> Result<(PathBuf, Vec<u8>, FileRecord)> {
    let plain = dir.join(rel);
    let gz = dir.join(format!("{rel}.gz"));
    let path = if plain.is_file() {
        plain
    } else if gz.is_file() {
        gz
    } else {
        return Err(DataError::Missing { path: plain });
    };
    let bytes = read_maybe_gz(&path)?;
    let sha256 = sha256_hex(&bytes);
    let verified = match manifest.expected(rel) {
        Some(expected) if expected != sha256 => {
            return Err(DataError::Hash {
                path,
                expected: expected.to_string(),
                actual: sha256,
            })
        }
        Some(_) => true,
        None => false,
    };
    let record = FileRecord {
        path: rel.to_string(),
        sha256,
        verified,
    };
    Ok((path, bytes, record))
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub files: Vec<FileRecord>,
}

impl LoadedDataset {
    pub fn unverified(&self) -> impl Iterator<Item = &FileRecord> {
        self.files.iter().filter(|f| !f.verified)
    }
}

fn load_split(
    name: DatasetName,
    dir: &Path,
    files: &[String],
    manifest: &HashManifest,
    records: &mut Vec<FileRecord>,
) -> Result<ImageSet> {
    match name {
        DatasetName::Cifar10 => {
            let mut pixels = Vec::new();
            let mut labels = Vec::new();
            for rel in files {
                let (path, bytes, rec) = read_verified(dir, rel, manifest)?;
                cifar::parse_batch(&bytes, &path, &mut pixels, &mut labels)?;
                records.push(rec);
            }
            Ok(ImageSet::new(name, [32, 32, 3], pixels, labels)?)
        }
        _ => {
            let (ipath, ibytes, irec) = read_verified(dir, &files[0], manifest)?;
            let (lpath, lbytes, lrec) = read_verified(dir, &files[1], manifest)?;
            records.extend([irec, lrec]);
            let (n, rows, cols, pixels) = idx::parse_images(&ibytes, &ipath)?;
            let labels = idx::parse_labels(&lbytes, &lpath)?;
            if labels.len() != n {
                return Err(DataError::Consistency {
                    images: n,
                    labels: labels.len(),
                });
            }
            Ok(ImageSet::new(name, [rows, cols, 1], pixels, labels)?)
        }
    }
}

/// Loads both splits with the embedded hash manifest.
pub fn load_dataset(name: DatasetName, dir: &Path) -> Result<LoadedDataset> {
    load_dataset_with(name, dir, &HashManifest::embedded())
}

pub fn load_dataset_with(
    name: DatasetName,
    dir: &Path,
    manifest: &HashManifest,
) -> Result<LoadedDataset> {
    let (train_files, test_files) = split_files(name);
    let mut files = Vec::new();
    let train = load_split(name, dir, &train_files, manifest, &mut files)?;
    let test = load_split(name, dir, &test_files, manifest, &mut files)?;
    Ok(LoadedDataset {
        dataset: Dataset::new(name, train, test)?,
        files,
    })
}
