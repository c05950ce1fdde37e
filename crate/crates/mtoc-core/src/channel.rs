//! Real-valued Rayleigh fading + Gaussian noise channel, and the per-sample
//! power normalization applied to the encoder output before transmission.
//!
//! A receiver observes `y = h * z + n`. With block fading `h` is one Rayleigh
//! magnitude per sample shared by all `n_c` symbols; otherwise every symbol
//! gets its own gain. Noise is drawn against unit signal power, which the
//! power normalization guarantees on average.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Rayleigh magnitude with scale `1/sqrt(2)`, so `E[h^2] = 1`.
    Rayleigh,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// `f64::INFINITY` disables the noise.
    pub snr_db: f64,
    pub fading: Fading,
    pub block_fading: bool,
    /// Mixed into the receiver's random stream.
    pub seed: u64,
}

impl ChannelConfig {
    pub fn rayleigh(snr_db: f64) -> Self {
        ChannelConfig {
            snr_db,
            fading: Fading::Rayleigh,
            block_fading: true,
            seed: 0,
        }
    }

    /// Unit gain, no noise.
    pub fn identity() -> Self {
        ChannelConfig {
            snr_db: f64::INFINITY,
            fading: Fading::Fixed(1.0),
            block_fading: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::config(format!("invalid snr_db {}", self.snr_db)));
        }
        if let Fading::Fixed(g) = self.fading {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config(format!(
                    "fixed gain must be finite and >= 0, got {g}"
                )));
            }
        }
        Ok(())
    }

    pub fn noise_sigma(&self) -> Result<f64> {
        snr_to_noise_sigma(self.snr_db, 1.0)
    }
}

/// Standard deviation of the noise for a given SNR and signal power.
pub fn snr_to_noise_sigma(snr_db: f64, signal_power: f64) -> Result<f64> {
    if signal_power.is_nan() || signal_power <= 0.0 || signal_power.is_infinite() {
        return Err(Error::config(format!(
            "signal power must be positive, got {signal_power}"
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::config("snr_db is NaN"));
    }
    Ok(libm::sqrt(signal_power * libm::pow(10.0, -snr_db / 10.0)))
}

pub fn rayleigh_sample<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Tensor {
    Tensor::from_fn(alloc::vec![count], |_| rayleigh(rng))
}

fn rayleigh<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    libm::sqrt((a * a + b * b) / 2.0)
}

/// Gains and noise of one channel use over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `[B]` under block fading, `[B, n_c]` otherwise.
    pub h: Tensor,
    pub noise: Tensor,
}

impl ChannelRealization {
    /// Gain applied to symbol `j` of sample `b`.
    pub fn gain(&self, b: usize, j: usize) -> f64 {
        match self.h.shape().len() {
            1 => self.h.data()[b],
            _ => self.h.row(b)[j],
        }
    }

    fn check(&self, t: &Tensor, op: &'static str) -> Result<()> {
        if t.shape() != self.noise.shape() {
            return Err(Error::state(format!(
                "{op}: realization is for shape {:?}, got {:?}",
                self.noise.shape(),
                t.shape()
            )));
        }
        Ok(())
    }
}

/// Draws gains then noise for a `[batch, n_c]` transmission.
pub fn realize<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    batch: usize,
    n_c: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let gains = if cfg.block_fading { batch } else { batch * n_c };
    let h_shape = if cfg.block_fading {
        alloc::vec![batch]
    } else {
        alloc::vec![batch, n_c]
    };
    let h = match cfg.fading {
        Fading::Rayleigh => rayleigh_sample(rng, gains).reshape(h_shape)?,
        Fading::Fixed(g) => Tensor::full(h_shape, g),
    };
    let sigma = cfg.noise_sigma()?;
    let noise = if sigma == 0.0 {
        Tensor::zeros(alloc::vec![batch, n_c])
    } else {
        Tensor::from_fn(alloc::vec![batch, n_c], |_| {
            sigma * rng.sample::<f64, _>(StandardNormal)
        })
    };
    Ok(ChannelRealization { h, noise })
}

/// `y = h * z + noise` for a given realization.
pub fn apply(z: &Tensor, realization: &ChannelRealization) -> Result<Tensor> {
    z.expect_rank("channel input", 2)?;
    realization.check(z, "channel apply")?;
    let n_c = z.row_len();
    let mut y = realization.noise.clone();
    for (i, (out, &x)) in y.data_mut().iter_mut().zip(z.data()).enumerate() {
        *out += realization.gain(i / n_c, i % n_c) * x;
    }
    Ok(y)
}

pub fn channel_forward<R: Rng + ?Sized>(
    z: &Tensor,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<(Tensor, ChannelRealization)> {
    z.expect_rank("channel input", 2)?;
    let realization = realize(cfg, z.batch(), z.row_len(), rng)?;
    let y = apply(z, &realization)?;
    Ok((y, realization))
}

/// `h * upstream`; noise does not depend on the input.
pub fn channel_backward(upstream: &Tensor, realization: &ChannelRealization) -> Result<Tensor> {
    realization.check(upstream, "channel backward")?;
    let n_c = upstream.row_len();
    let mut g = upstream.clone();
    for (i, v) in g.data_mut().iter_mut().enumerate() {
        *v *= realization.gain(i / n_c, i % n_c);
    }
    Ok(g)
}

const NORM_EPS: f64 = 1e-12;

/// Scales every row of `z` to mean symbol power 1. Returns the output and
/// the per-row norms needed for the backward pass.
pub fn normalize_power(z: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    z.expect_rank("normalize_power", 2)?;
    let n = z.row_len();
    let scale = libm::sqrt(n as f64);
    let mut out = z.clone();
    let mut norms = Vec::with_capacity(z.batch());
    for b in 0..z.batch() {
        let row = out.row_mut(b);
        let r = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>() + NORM_EPS);
        for v in row.iter_mut() {
            *v *= scale / r;
        }
        norms.push(r);
    }
    Ok((out, norms))
}

/// Vector-Jacobian product of [`normalize_power`]:
/// `sqrt(n) * (g / r - z (z . g) / r^3)` per row.
pub fn normalize_power_backward(z: &Tensor, norms: &[f64], upstream: &Tensor) -> Result<Tensor> {
    upstream.expect_shape("normalize_power_backward", z.shape())?;
    if norms.len() != z.batch() {
        return Err(Error::dim(
            "normalize_power_backward norms",
            &[z.batch()],
            &[norms.len()],
        ));
    }
    let scale = libm::sqrt(z.row_len() as f64);
    let mut out = upstream.clone();
    for (b, &r) in norms.iter().enumerate() {
        let zr = z.row(b);
        let dot: f64 = zr.iter().zip(upstream.row(b)).map(|(a, g)| a * g).sum();
        let r3 = r * r * r;
        for (o, &zi) in out.row_mut(b).iter_mut().zip(zr) {
            *o = scale * (*o / r - zi * dot / r3);
        }
    }
    Ok(out)
}
