//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! a base seed and a stream label, so adding a receiver or reordering work
//! never perturbs the draws seen by another component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EncoderInit,
    DecoderInit(usize),
    Shuffle,
    Dropout,
    Channel(usize),
    Eval,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::EncoderInit => 0x0001_0000,
            Stream::DecoderInit(i) => 0x0002_0000 + i as u64,
            Stream::Shuffle => 0x0003_0000,
            Stream::Dropout => 0x0004_0000,
            Stream::Channel(i) => 0x0005_0000 + i as u64,
            Stream::Eval => 0x0006_0000,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    mix(mix(seed) ^ stream.tag())
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
