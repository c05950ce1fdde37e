//! Non-overlapping 2-D max pooling. Trailing rows/columns that do not fill a
//! whole window are dropped.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pooled map plus, for every output element, the flat input index of the
/// window maximum (first occurrence on ties).
#[derive(Debug, Clone)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

pub fn maxpool2d_forward(input: &Tensor, pool: (usize, usize)) -> Result<Pooled> {
    input.expect_rank("maxpool2d", 4)?;
    let (ph, pw) = pool;
    if ph == 0 || pw == 0 {
        return Err(Error::config("pool size must be at least 1"));
    }
    let s = input.shape();
    let (batch, h, w, c) = (s[0], s[1], s[2], s[3]);
    if ph > h || pw > w {
        return Err(Error::dim(
            "maxpool2d pool exceeds input",
            &[h, w],
            &[ph, pw],
        ));
    }
    let (oh, ow) = (h / ph, w / pw);
    let x = input.data();
    let mut out = Vec::with_capacity(batch * oh * ow * c);
    let mut argmax = Vec::with_capacity(batch * oh * ow * c);
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((b * h + oy * ph) * w + ox * pw) * c + ch;
                    let mut best = x[best_idx];
                    for dy in 0..ph {
                        for dx in 0..pw {
                            let idx = ((b * h + oy * ph + dy) * w + ox * pw + dx) * c + ch;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![batch, oh, ow, c], out)?,
        argmax,
    })
}

/// Routes each upstream element to the argmax position of its window.
pub fn maxpool2d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor,
) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::dim(
            "maxpool2d_backward",
            &[argmax.len()],
            upstream.shape(),
        ));
    }
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(upstream.data()) {
        d[idx] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_takes_the_maximum() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = maxpool2d_forward(&x, (2, 2)).unwrap();
        assert_eq!(p.output.data(), &[4.0]);
        assert_eq!(p.argmax, vec![3]);
    }

    #[test]
    fn constant_input_stays_constant_and_partial_windows_drop() {
        let x = Tensor::full(vec![2, 5, 7, 3], 0.75);
        let p = maxpool2d_forward(&x, (2, 2)).unwrap();
        assert_eq!(p.output.shape(), &[2, 2, 3, 3]);
        assert!(p.output.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn gradient_goes_to_argmax_only() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0, 5.0, 3.0, 4.0]).unwrap();
        let p = maxpool2d_forward(&x, (2, 2)).unwrap();
        let g = Tensor::new(vec![1, 1, 1, 1], vec![2.5]).unwrap();
        let dx = maxpool2d_backward(x.shape(), &p.argmax, &g).unwrap();
        assert_eq!(dx.data(), &[0.0, 2.5, 0.0, 0.0]);
    }

    #[test]
    fn oversized_pool_is_rejected() {
        let x = Tensor::zeros(vec![1, 1, 3, 1]);
        assert!(maxpool2d_forward(&x, (2, 2)).is_err());
    }
}
