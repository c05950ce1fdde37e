//! Valid (unpadded), stride-1 2-D convolution over `B×H×W×C` inputs.
//!
//! Implemented as im2col followed by a single matrix product over the whole
//! batch. Kernels are laid out `kh×kw×C×F`, so the flattened kernel is
//! already the `(kh·kw·C)×F` right-hand matrix.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    c: usize,
    kh: usize,
    kw: usize,
    f: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn of(input: &Tensor, kernels: &Tensor) -> Result<Self> {
        input.expect_rank("conv2d", 4)?;
        kernels.expect_rank("conv2d", 4)?;
        let s = input.shape();
        let k = kernels.shape();
        let (batch, h, w, c) = (s[0], s[1], s[2], s[3]);
        let (kh, kw, kc, f) = (k[0], k[1], k[2], k[3]);
        if kc != c {
            return Err(Error::dim("conv2d channels", &[c], &[kc]));
        }
        if kh > h || kw > w {
            return Err(Error::dim(
                "conv2d kernel exceeds input",
                &[h, w],
                &[kh, kw],
            ));
        }
        Ok(Geometry {
            batch,
            h,
            w,
            c,
            kh,
            kw,
            f,
            oh: h - kh + 1,
            ow: w - kw + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.c
    }

    fn rows(&self) -> usize {
        self.batch * self.oh * self.ow
    }
}

fn im2col(input: &[f64], g: &Geometry) -> Vec<f64> {
    let plen = g.patch_len();
    let mut cols = vec![0.0; g.rows() * plen];
    let mut row = 0;
    for b in 0..g.batch {
        let sample = &input[b * g.h * g.w * g.c..(b + 1) * g.h * g.w * g.c];
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let dst = &mut cols[row * plen..(row + 1) * plen];
                for ky in 0..g.kh {
                    let src = ((oy + ky) * g.w + ox) * g.c;
                    let span = g.kw * g.c;
                    dst[ky * span..(ky + 1) * span].copy_from_slice(&sample[src..src + span]);
                }
                row += 1;
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], g: &Geometry) -> Vec<f64> {
    let plen = g.patch_len();
    let mut out = vec![0.0; g.batch * g.h * g.w * g.c];
    let mut row = 0;
    for b in 0..g.batch {
        let sample = &mut out[b * g.h * g.w * g.c..(b + 1) * g.h * g.w * g.c];
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let src = &cols[row * plen..(row + 1) * plen];
                for ky in 0..g.kh {
                    let dst = ((oy + ky) * g.w + ox) * g.c;
                    let span = g.kw * g.c;
                    for (d, s) in sample[dst..dst + span]
                        .iter_mut()
                        .zip(&src[ky * span..(ky + 1) * span])
                    {
                        *d += s;
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// Sliding-window cross-correlation plus per-filter bias.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let g = Geometry::of(input, kernels)?;
    bias.expect_shape("conv2d bias", &[g.f])?;
    let cols = im2col(input.data(), &g);
    let mut out = linalg::matmul(&cols, kernels.data(), g.rows(), g.patch_len(), g.f);
    for px in out.chunks_exact_mut(g.f) {
        for (o, &b) in px.iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Tensor::new(vec![g.batch, g.oh, g.ow, g.f], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub input: Option<Tensor>,
}

/// Gradients given the gradient w.r.t. the (pre-activation) output map.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    upstream: &Tensor,
    need_input_grad: bool,
) -> Result<ConvGrads> {
    let g = Geometry::of(input, kernels)?;
    upstream.expect_shape("conv2d_backward", &[g.batch, g.oh, g.ow, g.f])?;
    let cols = im2col(input.data(), &g);
    let dk = linalg::matmul_tn(&cols, upstream.data(), g.rows(), g.patch_len(), g.f);
    let db = linalg::col_sums(upstream.data(), g.rows(), g.f);
    let dx = if need_input_grad {
        let dcols = linalg::matmul_nt(
            upstream.data(),
            kernels.data(),
            g.rows(),
            g.f,
            g.patch_len(),
        );
        Some(Tensor::new(input.shape().to_vec(), col2im(&dcols, &g))?)
    } else {
        None
    };
    Ok(ConvGrads {
        kernels: Tensor::new(kernels.shape().to_vec(), dk)?,
        bias: Tensor::new(vec![g.f], db)?,
        input: dx,
    })
}
