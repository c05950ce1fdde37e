use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad format: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: expected {expected} bytes, found {found}")]
    Length {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{images} images but {labels} labels")]
    Consistency { images: usize, labels: usize },
    #[error("{path}: label {label} at record {index} is out of range")]
    Value {
        path: PathBuf,
        index: usize,
        label: u8,
    },
    #[error("{path}: sha256 {actual} does not match the recorded {expected}")]
    Hash {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("missing dataset file {path} (also tried {path}.gz)")]
    Missing { path: PathBuf },
    #[error(transparent)]
    Core(#[from] mtoc_core::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
