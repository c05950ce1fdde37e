use core::fmt;
use core::str::FromStr;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    ReLU,
    Linear,
    /// Row-wise over the last axis.
    Softmax,
}

impl Activation {
    pub fn apply(self, x: Tensor) -> Tensor {
        match self {
            Activation::Linear => x,
            Activation::ReLU => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Softmax => softmax_rows(&x),
        }
    }

    /// Gradient w.r.t. the activation input, given its output and the
    /// gradient w.r.t. that output.
    pub fn backward(self, output: &Tensor, upstream: &Tensor) -> Result<Tensor> {
        upstream.expect_shape("activation backward", output.shape())?;
        Ok(match self {
            Activation::Linear => upstream.clone(),
            Activation::ReLU => {
                let data = output
                    .data()
                    .iter()
                    .zip(upstream.data())
                    .map(|(&y, &g)| if y > 0.0 { g } else { 0.0 })
                    .collect();
                Tensor::new(output.shape().to_vec(), data)?
            }
            Activation::Softmax => {
                let k = *output.shape().last().unwrap();
                let mut data = Vec::with_capacity(output.len());
                for (s, g) in output
                    .data()
                    .chunks_exact(k)
                    .zip(upstream.data().chunks_exact(k))
                {
                    let dot: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    data.extend(s.iter().zip(g).map(|(si, gi)| si * (gi - dot)));
                }
                Tensor::new(output.shape().to_vec(), data)?
            }
        })
    }
}

/// Numerically stabilized softmax along the last axis.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let k = *x.shape().last().unwrap();
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::ReLU => "relu",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::ReLU),
            "linear" => Ok(Activation::Linear),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::input(alloc::format!("unknown activation `{other}`"))),
        }
    }
}
