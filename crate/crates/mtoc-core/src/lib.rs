//! Multi-receiver task-oriented communications.
//!
//! A shared encoder compresses each input sample to `n_c` real symbols which
//! are broadcast once. Every receiver observes them through its own Rayleigh
//! fading + Gaussian noise channel and runs its own decoder for a binary
//! classification task. Encoder and decoders are trained jointly on the
//! weighted sum of the per-task cross-entropies.
//!
//! The crate is `no_std` (with `alloc`); file formats, dataset loaders and the
//! command line live in the `mtoc` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod channel;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tasks;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
