//! Inverted dropout.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config("dropout rate must lie in [0, 1)"));
    }
    Ok(())
}

/// Output and, in training mode, the per-element scale mask (`0` or
/// `1/(1-rate)`) needed by the backward pass.
pub fn dropout_forward<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let out = dropout_apply(input, &mask)?;
    Ok((out, Some(mask)))
}

/// Multiplies elementwise by a stored mask; used for both directions.
pub fn dropout_apply(t: &Tensor, mask: &[f64]) -> Result<Tensor> {
    if mask.len() != t.len() {
        return Err(Error::dim("dropout mask", &[t.len()], &[mask.len()]));
    }
    let data = t.data().iter().zip(mask).map(|(x, m)| x * m).collect();
    Tensor::new(t.shape().to_vec(), data)
}
