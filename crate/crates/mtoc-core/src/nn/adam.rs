//! Adam with bias correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Moment estimates for one parameter set. Moments are allocated on the
/// first step and must keep the same shapes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over `(param, grad)` pairs, always presented in the same
    /// order.
    pub fn update<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a mut Tensor, &'a Tensor)>,
    {
        let pairs: Vec<_> = pairs.into_iter().collect();
        if self.m.is_empty() {
            self.m = pairs
                .iter()
                .map(|(p, _)| Tensor::zeros(p.shape().to_vec()))
                .collect();
            self.v = self.m.clone();
        }
        if pairs.len() != self.m.len() {
            return Err(Error::dim(
                "adam parameter count",
                &[self.m.len()],
                &[pairs.len()],
            ));
        }
        for ((p, g), m) in pairs.iter().zip(&self.m) {
            p.expect_shape("adam param", m.shape())?;
            g.expect_shape("adam grad", m.shape())?;
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - libm::pow(beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.step as f64);
        for ((param, grad), (m, v)) in pairs
            .into_iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let it = param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((p, &g), (m, v)) in it {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// Convenience form over parallel parameter and gradient slices.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim("adam_step", &[params.len()], &[grads.len()]));
    }
    state.update(params.iter_mut().zip(grads))
}
