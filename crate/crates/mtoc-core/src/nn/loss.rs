//! Softmax fused with categorical cross-entropy.

use alloc::format;

use super::activation::softmax_rows;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct CrossEntropy {
    /// Mean over the batch of `-ln p[b, label_b]`.
    pub loss: f64,
    pub probs: Tensor,
}

impl CrossEntropy {
    /// `(probs - onehot) / B`, the gradient of `loss` w.r.t. the logits.
    pub fn grad(&self, labels: &[usize]) -> Tensor {
        let batch = self.probs.batch();
        let k = self.probs.row_len();
        let mut g = self.probs.scale(1.0 / batch as f64);
        for (row, &label) in g.data_mut().chunks_exact_mut(k).zip(labels) {
            row[label] -= 1.0 / batch as f64;
        }
        g
    }
}

pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<CrossEntropy> {
    logits.expect_rank("softmax_cross_entropy", 2)?;
    let (batch, k) = (logits.shape()[0], logits.shape()[1]);
    if k < 2 {
        return Err(Error::input("cross-entropy needs at least two classes"));
    }
    if labels.len() != batch {
        return Err(Error::dim(
            "softmax_cross_entropy labels",
            &[batch],
            &[labels.len()],
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::input(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let probs = softmax_rows(logits);
    let mut total = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        // log-softmax straight from the logits keeps extreme inputs finite
        let row = logits.row(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
        total += lse - row[label];
    }
    Ok(CrossEntropy {
        loss: total / batch as f64,
        probs,
    })
}
