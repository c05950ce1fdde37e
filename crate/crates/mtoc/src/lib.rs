//! Dataset loaders, checkpoints, experiment sweeps and the `mtoc` command
//! line on top of [`mtoc_core`].

pub mod checkpoint;
pub mod cifar;
pub mod config;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod idx;

pub use mtoc_core as core;
