//! Encoder/decoder architectures and the assembled multi-receiver system.

use core::fmt;
use core::str::FromStr;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, LayerKind, Network, NetworkSpec};
use crate::rng::{self, Stream};
use crate::tasks::{DatasetName, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigId {
    MnistFnn,
    FashionCnn,
    CifarCnn,
}

impl ConfigId {
    pub fn for_dataset(dataset: DatasetName) -> Self {
        match dataset {
            DatasetName::Mnist => ConfigId::MnistFnn,
            DatasetName::FashionMnist => ConfigId::FashionCnn,
            DatasetName::Cifar10 => ConfigId::CifarCnn,
        }
    }

    pub fn dataset(self) -> DatasetName {
        match self {
            ConfigId::MnistFnn => DatasetName::Mnist,
            ConfigId::FashionCnn => DatasetName::FashionMnist,
            ConfigId::CifarCnn => DatasetName::Cifar10,
        }
    }

    pub fn input_shape(self) -> [usize; 3] {
        self.dataset().image_shape()
    }

    pub fn key(self) -> &'static str {
        match self {
            ConfigId::MnistFnn => "mnist_fnn",
            ConfigId::FashionCnn => "fashion_cnn",
            ConfigId::CifarCnn => "cifar_cnn",
        }
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mnist_fnn" => Ok(ConfigId::MnistFnn),
            "fashion_cnn" => Ok(ConfigId::FashionCnn),
            "cifar_cnn" => Ok(ConfigId::CifarCnn),
            other => Err(Error::input(format!(
                "unknown model configuration `{other}`"
            ))),
        }
    }
}

fn check_nc(n_c: usize) -> Result<()> {
    if n_c < 2 {
        return Err(Error::config(format!("n_c must be at least 2, got {n_c}")));
    }
    Ok(())
}

pub fn encoder_spec(cfg: ConfigId, n_c: usize) -> Result<NetworkSpec> {
    check_nc(n_c)?;
    use Activation::{Linear, ReLU};
    let layers = match cfg {
        ConfigId::MnistFnn => vec![
            LayerKind::Flatten,
            LayerKind::dense(256, ReLU),
            LayerKind::dense(128, ReLU),
            LayerKind::dense(n_c, Linear),
        ],
        ConfigId::FashionCnn => vec![
            LayerKind::conv(32, (3, 3), ReLU),
            LayerKind::maxpool((2, 2)),
            LayerKind::conv(32, (3, 3), ReLU),
            LayerKind::maxpool((2, 2)),
            LayerKind::Flatten,
            LayerKind::Dropout { rate: 0.5 },
            LayerKind::dense(128, ReLU),
            LayerKind::dense(n_c, Linear),
        ],
        ConfigId::CifarCnn => vec![
            LayerKind::conv(8, (3, 3), ReLU),
            LayerKind::conv(4, (3, 3), ReLU),
            LayerKind::maxpool((2, 2)),
            LayerKind::Dropout { rate: 0.1 },
            LayerKind::conv(4, (3, 3), ReLU),
            LayerKind::maxpool((2, 2)),
            LayerKind::Dropout { rate: 0.1 },
            LayerKind::Flatten,
            LayerKind::dense(128, ReLU),
            LayerKind::dense(n_c, Linear),
        ],
    };
    NetworkSpec::new(cfg.input_shape().to_vec(), layers)
}

/// `n_c -> n_c -> floor(n_c / 2) -> 2`.
pub fn decoder_spec(n_c: usize) -> Result<NetworkSpec> {
    check_nc(n_c)?;
    NetworkSpec::new(
        vec![n_c],
        vec![
            LayerKind::dense(n_c, Activation::ReLU),
            LayerKind::dense(n_c / 2, Activation::ReLU),
            LayerKind::dense(2, Activation::Softmax),
        ],
    )
}

pub fn build_encoder(cfg: ConfigId, n_c: usize, seed: u64) -> Result<Network> {
    Ok(Network::new(
        encoder_spec(cfg, n_c)?,
        &mut rng::stream(seed, Stream::EncoderInit),
    ))
}

/// Decoder of receiver `index` (0-based).
pub fn build_decoder(n_c: usize, index: usize, seed: u64) -> Result<Network> {
    Ok(Network::new(
        decoder_spec(n_c)?,
        &mut rng::stream(seed, Stream::DecoderInit(index)),
    ))
}

/// What a receiver needs before its decoder exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSpec {
    pub channel: ChannelConfig,
    pub task: TaskSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub channel: ChannelConfig,
    pub decoder: Network,
    pub task: TaskSpec,
    pub weight: f64,
}

/// One shared encoder broadcasting to per-receiver channels and decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct MtocSystem {
    pub encoder: Network,
    pub receivers: Vec<Receiver>,
}

fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::config(format!("task weight {w} outside [0, 1]")));
    }
    Ok(())
}

impl MtocSystem {
    /// Validates widths and weights of pre-built parts.
    pub fn from_parts(encoder: Network, receivers: Vec<Receiver>) -> Result<Self> {
        if receivers.is_empty() {
            return Err(Error::config("a system needs at least one receiver"));
        }
        let out = encoder.spec().output_shape();
        if out.len() != 1 {
            return Err(Error::config(format!(
                "encoder output must be flat, got {out:?}"
            )));
        }
        for (i, r) in receivers.iter().enumerate() {
            if r.decoder.spec().input_shape() != out.as_slice() {
                return Err(Error::config(format!(
                    "decoder {i} expects input {:?} but the encoder emits {out:?}",
                    r.decoder.spec().input_shape()
                )));
            }
            if r.decoder.spec().output_shape() != [2] {
                return Err(Error::config(format!(
                    "decoder {i} must end in a two-way output"
                )));
            }
            check_weight(r.weight)?;
            r.channel.validate()?;
        }
        Ok(MtocSystem { encoder, receivers })
    }

    pub fn n_c(&self) -> usize {
        self.encoder.spec().output_shape()[0]
    }

    pub fn len(&self) -> usize {
        self.receivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.receivers.iter().map(|r| r.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.receivers.len() {
            return Err(Error::dim(
                "set_weights",
                &[self.receivers.len()],
                &[weights.len()],
            ));
        }
        for &w in weights {
            check_weight(w)?;
        }
        for (r, &w) in self.receivers.iter_mut().zip(weights) {
            r.weight = w;
        }
        Ok(())
    }

    pub fn tasks(&self) -> Vec<TaskSpec> {
        self.receivers.iter().map(|r| r.task).collect()
    }
}

/// Builds the encoder for `cfg` and one decoder per receiver, each from its
/// own initialization stream.
pub fn assemble(
    cfg: ConfigId,
    n_c: usize,
    receivers: &[ReceiverSpec],
    seed: u64,
) -> Result<MtocSystem> {
    let encoder = build_encoder(cfg, n_c, seed)?;
    let receivers = receivers
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(Receiver {
                channel: r.channel,
                decoder: build_decoder(n_c, i, seed)?,
                task: r.task,
                weight: r.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MtocSystem::from_parts(encoder, receivers)
}
