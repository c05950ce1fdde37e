//! Self-describing parameter checkpoints.
//!
//! ```text
//! "MTOCCKPT"            8 bytes
//! endianness tag        1 byte, b'L' or b'B'
//! version               u32
//! metadata length       u64
//! metadata              UTF-8 JSON: layer lists, tensor shapes, receivers
//! parameters            f64 values, tensor after tensor in metadata order
//! ```
//!
//! Integers and floats use the tagged byte order. Values are stored as raw
//! bit patterns, so a save/load round trip is exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use mtoc_core::channel::{ChannelConfig, Fading};
use mtoc_core::model::{MtocSystem, Receiver};
use mtoc_core::nn::{LayerKind, Network, NetworkSpec};
use mtoc_core::tasks::{DatasetName, TaskSpec};
use mtoc_core::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"MTOCCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("checkpoint metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] mtoc_core::Error),
}

type Result<T> = std::result::Result<T, CheckpointError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

impl Endian {
    pub fn native() -> Self {
        if cfg!(target_endian = "big") {
            Endian::Big
        } else {
            Endian::Little
        }
    }

    fn tag(self) -> u8 {
        match self {
            Endian::Little => b'L',
            Endian::Big => b'B',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkMeta {
    key: String,
    input_shape: Vec<usize>,
    layers: Vec<String>,
    tensors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReceiverMeta {
    dataset: String,
    task: String,
    weight: f64,
    /// `None` for a noiseless channel.
    snr_db: Option<f64>,
    fixed_gain: Option<f64>,
    block_fading: bool,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Metadata {
    networks: Vec<NetworkMeta>,
    receivers: Vec<ReceiverMeta>,
    #[serde(default)]
    extra: serde_json::Value,
}

fn network_meta(key: String, net: &Network) -> NetworkMeta {
    NetworkMeta {
        key,
        input_shape: net.spec().input_shape().to_vec(),
        layers: net
            .spec()
            .layers()
            .iter()
            .map(LayerKind::to_string)
            .collect(),
        tensors: net.params().map(|t| t.shape().to_vec()).collect(),
    }
}

/// A system plus free-form metadata stored next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub system: MtocSystem,
    pub extra: serde_json::Value,
}

pub fn write<W: Write>(
    mut w: W,
    system: &MtocSystem,
    extra: &serde_json::Value,
    endian: Endian,
) -> Result<()> {
    let mut networks = vec![network_meta("encoder".into(), &system.encoder)];
    networks.extend(
        system
            .receivers
            .iter()
            .enumerate()
            .map(|(i, r)| network_meta(format!("decoder.{i}"), &r.decoder)),
    );
    let receivers = system
        .receivers
        .iter()
        .map(|r| ReceiverMeta {
            dataset: r.task.dataset.key().to_string(),
            task: r.task.id(),
            weight: r.weight,
            snr_db: r.channel.snr_db.is_finite().then_some(r.channel.snr_db),
            fixed_gain: match r.channel.fading {
                Fading::Fixed(g) => Some(g),
                Fading::Rayleigh => None,
            },
            block_fading: r.channel.block_fading,
            seed: r.channel.seed,
        })
        .collect();
    let meta = serde_json::to_vec(&Metadata {
        networks,
        receivers,
        extra: extra.clone(),
    })?;

    let u32b = |v: u32| match endian {
        Endian::Little => v.to_le_bytes(),
        Endian::Big => v.to_be_bytes(),
    };
    let u64b = |v: u64| match endian {
        Endian::Little => v.to_le_bytes(),
        Endian::Big => v.to_be_bytes(),
    };
    w.write_all(MAGIC)?;
    w.write_all(&[endian.tag()])?;
    w.write_all(&u32b(VERSION))?;
    w.write_all(&u64b(meta.len() as u64))?;
    w.write_all(&meta)?;
    let nets = std::iter::once(&system.encoder).chain(system.receivers.iter().map(|r| &r.decoder));
    for t in nets.flat_map(Network::params) {
        for v in t.data() {
            w.write_all(&u64b(v.to_bits()))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let endian = match tag[0] {
        b'L' => Endian::Little,
        b'B' => Endian::Big,
        other => {
            return Err(CheckpointError::Format(format!(
                "unknown endianness tag {other:#04x}"
            )))
        }
    };
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(match endian {
            Endian::Little => u64::from_le_bytes(b8),
            Endian::Big => u64::from_be_bytes(b8),
        })
    };
    r.read_exact(&mut b4)?;
    let version = match endian {
        Endian::Little => u32::from_le_bytes(b4),
        Endian::Big => u32::from_be_bytes(b4),
    };
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let len = read_u64(&mut r)? as usize;
    let mut meta = vec![0u8; len];
    r.read_exact(&mut meta)?;
    let meta: Metadata = serde_json::from_slice(&meta)?;

    let mut networks = Vec::with_capacity(meta.networks.len());
    for nm in &meta.networks {
        let layers = nm
            .layers
            .iter()
            .map(|l| l.parse::<LayerKind>())
            .collect::<mtoc_core::Result<Vec<_>>>()?;
        let spec = NetworkSpec::new(nm.input_shape.clone(), layers)?;
        let mut params = Vec::with_capacity(nm.tensors.len());
        for shape in &nm.tensors {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| read_u64(&mut r).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            params.push(Tensor::new(shape.clone(), data)?);
        }
        networks.push((nm.key.clone(), Network::from_params(spec, params)?));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CheckpointError::Format(
            "trailing bytes after parameters".into(),
        ));
    }

    let mut networks = networks.into_iter();
    let encoder = match networks.next() {
        Some((key, net)) if key == "encoder" => net,
        _ => {
            return Err(CheckpointError::Format(
                "first network must be the encoder".into(),
            ))
        }
    };
    if networks.len() != meta.receivers.len() {
        return Err(CheckpointError::Format(
            "decoder and receiver counts differ".into(),
        ));
    }
    let receivers = networks
        .zip(&meta.receivers)
        .enumerate()
        .map(|(i, ((key, decoder), rm))| {
            if key != format!("decoder.{i}") {
                return Err(CheckpointError::Format(format!(
                    "unexpected network key `{key}`"
                )));
            }
            let dataset: DatasetName = rm.dataset.parse()?;
            Ok(Receiver {
                channel: ChannelConfig {
                    snr_db: rm.snr_db.unwrap_or(f64::INFINITY),
                    fading: rm.fixed_gain.map_or(Fading::Rayleigh, Fading::Fixed),
                    block_fading: rm.block_fading,
                    seed: rm.seed,
                },
                decoder,
                task: TaskSpec::parse(dataset, &rm.task)?,
                weight: rm.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        system: MtocSystem::from_parts(encoder, receivers)?,
        extra: meta.extra,
    })
}

pub fn save(path: &Path, system: &MtocSystem, extra: &serde_json::Value) -> Result<()> {
    write(
        BufWriter::new(File::create(path)?),
        system,
        extra,
        Endian::native(),
    )
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    read(BufReader::new(File::open(path)?))
}
