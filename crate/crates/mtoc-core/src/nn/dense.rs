//! Fully connected layer.

use alloc::vec;

use super::linalg;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `out[b, j] = Σ_k input[b, k] · weights[k, j] + bias[j]`.
///
/// The activation is applied by the caller.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, d_in, d_out) = dims(input, weights, bias)?;
    let mut out = linalg::matmul(input.data(), weights.data(), batch, d_in, d_out);
    for row in out.chunks_exact_mut(d_out) {
        for (o, &b) in row.iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Tensor::new(vec![batch, d_out], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Tensor,
    /// `None` when the caller did not ask for it.
    pub input: Option<Tensor>,
}

/// Gradients of a dense layer given the gradient w.r.t. its (pre-activation)
/// output.
pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    need_input_grad: bool,
) -> Result<DenseGrads> {
    input.expect_rank("dense_backward", 2)?;
    let (batch, d_in) = (input.shape()[0], input.shape()[1]);
    weights.expect_rank("dense_backward", 2)?;
    let d_out = weights.shape()[1];
    upstream.expect_shape("dense_backward", &[batch, d_out])?;

    let dw = linalg::matmul_tn(input.data(), upstream.data(), batch, d_in, d_out);
    let db = linalg::col_sums(upstream.data(), batch, d_out);
    let dx = if need_input_grad {
        let dx = linalg::matmul_nt(upstream.data(), weights.data(), batch, d_out, d_in);
        Some(Tensor::new(vec![batch, d_in], dx)?)
    } else {
        None
    };
    Ok(DenseGrads {
        weights: Tensor::new(vec![d_in, d_out], dw)?,
        bias: Tensor::new(vec![d_out], db)?,
        input: dx,
    })
}

fn dims(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    input.expect_rank("dense_forward", 2)?;
    weights.expect_rank("dense_forward", 2)?;
    let (batch, d_in) = (input.shape()[0], input.shape()[1]);
    if weights.shape()[0] != d_in {
        return Err(Error::dim("dense_forward", &[d_in], &weights.shape()[..1]));
    }
    let d_out = weights.shape()[1];
    bias.expect_shape("dense_forward", &[d_out])?;
    Ok((batch, d_in, d_out))
}
