use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::activation::Activation;
use super::conv::{conv2d_backward, conv2d_forward};
use super::dense::{dense_backward, dense_forward};
use super::dropout::{dropout_apply, dropout_forward};
use super::layer::LayerKind;
use super::pool::{maxpool2d_backward, maxpool2d_forward};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Declarative layer stack with a fixed per-sample input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    input_shape: Vec<usize>,
    layers: Vec<LayerKind>,
}

impl NetworkSpec {
    pub fn new(input_shape: impl Into<Vec<usize>>, layers: Vec<LayerKind>) -> Result<Self> {
        let spec = NetworkSpec {
            input_shape: input_shape.into(),
            layers,
        };
        if spec.input_shape.is_empty() || spec.input_shape.contains(&0) {
            return Err(Error::config(
                "network input shape must be nonempty and positive",
            ));
        }
        spec.shape_trace()?;
        Ok(spec)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    /// Per-sample shapes: the input followed by every layer's output.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut trace = vec![self.input_shape.clone()];
        for kind in &self.layers {
            let next = kind.output_shape(trace.last().unwrap())?;
            trace.push(next);
        }
        Ok(trace)
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.shape_trace()
            .expect("validated at construction")
            .pop()
            .unwrap()
    }

    /// Parameter shapes grouped by layer.
    pub fn param_shapes(&self) -> Vec<Vec<Vec<usize>>> {
        let trace = self.shape_trace().expect("validated at construction");
        self.layers
            .iter()
            .zip(&trace)
            .map(|(kind, input)| kind.param_shapes(input).expect("validated at construction"))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .flatten()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Affine {
        input: Tensor,
        /// Post-activation output; kept only when the activation is nonlinear.
        output: Option<Tensor>,
        activation: Activation,
    },
    Pool {
        input_shape: Vec<usize>,
        argmax: Vec<usize>,
    },
    Flatten {
        input_shape: Vec<usize>,
    },
    Dropout {
        mask: Option<Vec<f64>>,
    },
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    kind: LayerKind,
    params: Vec<Tensor>,
    grads: Vec<Tensor>,
}

/// Instantiated network: parameters, gradient slots and the activations
/// cached by the last training-style forward pass.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    cache: Option<Vec<Cache>>,
}

impl PartialEq for Network {
    /// Compares architecture and parameters; gradients and caches are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.params == b.params)
    }
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Self {
        let shapes = spec.param_shapes();
        let layers = spec
            .layers
            .iter()
            .zip(shapes)
            .map(|(&kind, shapes)| {
                let params: Vec<Tensor> = shapes
                    .iter()
                    .enumerate()
                    .map(|(i, shape)| {
                        if i == 0 {
                            let (fan_in, fan_out) = fans(shape);
                            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                            Tensor::from_fn(shape.clone(), |_| {
                                (2.0 * rng.random::<f64>() - 1.0) * limit
                            })
                        } else {
                            Tensor::zeros(shape.clone())
                        }
                    })
                    .collect();
                let grads = params
                    .iter()
                    .map(|p| Tensor::zeros(p.shape().to_vec()))
                    .collect();
                Layer {
                    kind,
                    params,
                    grads,
                }
            })
            .collect();
        Network {
            spec,
            layers,
            cache: None,
        }
    }

    /// Rebuilds a network from a flat, layer-ordered parameter list.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        let shapes = spec.param_shapes();
        let expected: usize = shapes.iter().map(Vec::len).sum();
        if params.len() != expected {
            return Err(Error::dim(
                "Network::from_params count",
                &[expected],
                &[params.len()],
            ));
        }
        let mut it = params.into_iter();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (&kind, shapes) in spec.layers.iter().zip(shapes) {
            let mut ps = Vec::with_capacity(shapes.len());
            for shape in shapes {
                let p = it.next().unwrap();
                p.expect_shape("Network::from_params", &shape)?;
                ps.push(p);
            }
            let grads = ps
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect();
            layers.push(Layer {
                kind,
                params: ps,
                grads,
            });
        }
        Ok(Network {
            spec,
            layers,
            cache: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn grads(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.grads.iter())
    }

    /// Parameters paired with their gradients, in layer order.
    pub fn params_and_grads_mut(&mut self) -> impl Iterator<Item = (&mut Tensor, &Tensor)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params.iter_mut().zip(l.grads.iter()))
    }

    /// Mutable access to one parameter tensor by flat index.
    pub fn param_mut(&mut self, index: usize) -> Option<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params.iter_mut())
            .nth(index)
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for g in self.layers.iter_mut().flat_map(|l| l.grads.iter_mut()) {
            g.fill(0.0);
        }
    }

    /// Forward pass that caches activations for [`backward`](Self::backward).
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        self.forward_cached(input, training, false, rng)
    }

    /// As [`forward`](Self::forward), but a trailing softmax is left out so the
    /// output is logits for a fused cross-entropy.
    pub fn forward_logits<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        self.forward_cached(input, training, true, rng)
    }

    /// Inference-mode forward. Dropout is off and nothing is mutated.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, false, false, &mut NoRng, None)
    }

    pub fn infer_logits(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, false, true, &mut NoRng, None)
    }

    fn forward_cached<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        training: bool,
        logits: bool,
        rng: &mut R,
    ) -> Result<Tensor> {
        self.cache = None;
        let mut caches = Vec::with_capacity(self.layers.len());
        let out = self.run(input, training, logits, rng, Some(&mut caches))?;
        self.cache = Some(caches);
        Ok(out)
    }

    fn run<R: Rng + ?Sized>(
        &self,
        input: &Tensor,
        training: bool,
        logits: bool,
        rng: &mut R,
        mut caches: Option<&mut Vec<Cache>>,
    ) -> Result<Tensor> {
        if input.shape().len() < 2 || input.shape()[1..] != self.spec.input_shape[..] {
            let mut expected = vec![input.shape().first().copied().unwrap_or(1)];
            expected.extend_from_slice(&self.spec.input_shape);
            return Err(Error::dim(
                "Network::forward input",
                &expected,
                input.shape(),
            ));
        }
        let last = self.layers.len().saturating_sub(1);
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let keep = caches.is_some();
            let (y, cache) = match layer.kind {
                LayerKind::Dense { activation, .. } | LayerKind::Conv2D { activation, .. } => {
                    let activation = if logits && i == last && activation == Activation::Softmax {
                        Activation::Linear
                    } else {
                        activation
                    };
                    let pre = match layer.kind {
                        LayerKind::Dense { .. } => {
                            dense_forward(&x, &layer.params[0], &layer.params[1])?
                        }
                        _ => conv2d_forward(&x, &layer.params[0], &layer.params[1])?,
                    };
                    let y = activation.apply(pre);
                    let cache = keep.then(|| Cache::Affine {
                        input: x,
                        output: (activation != Activation::Linear).then(|| y.clone()),
                        activation,
                    });
                    (y, cache)
                }
                LayerKind::MaxPool2D { pool_h, pool_w } => {
                    let pooled = maxpool2d_forward(&x, (pool_h, pool_w))?;
                    let cache = keep.then(|| Cache::Pool {
                        input_shape: x.shape().to_vec(),
                        argmax: pooled.argmax,
                    });
                    (pooled.output, cache)
                }
                LayerKind::Flatten => {
                    let input_shape = x.shape().to_vec();
                    let batch = input_shape[0];
                    let width = x.row_len();
                    let y = x.reshape(vec![batch, width])?;
                    (y, keep.then_some(Cache::Flatten { input_shape }))
                }
                LayerKind::Dropout { rate } => {
                    let (y, mask) = dropout_forward(&x, rate, training, rng)?;
                    (y, keep.then_some(Cache::Dropout { mask }))
                }
                LayerKind::ChannelStub => (x, keep.then_some(Cache::Identity)),
            };
            if let (Some(caches), Some(cache)) = (caches.as_deref_mut(), cache) {
                caches.push(cache);
            }
            x = y;
        }
        Ok(x)
    }

    /// Fills every parameter gradient from the gradient w.r.t. the output of
    /// the last cached forward, and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        Ok(self
            .backward_inner(upstream, true)?
            .expect("input gradient requested"))
    }

    /// As [`backward`](Self::backward) but skips the input gradient of the
    /// first layer, which nothing upstream consumes for an encoder.
    pub fn backward_params(&mut self, upstream: &Tensor) -> Result<()> {
        self.backward_inner(upstream, false).map(|_| ())
    }

    fn backward_inner(&mut self, upstream: &Tensor, need_input: bool) -> Result<Option<Tensor>> {
        let caches = self
            .cache
            .take()
            .ok_or_else(|| Error::state("backward called without a cached forward pass"))?;
        // below the first parameterized layer an input gradient is only needed
        // when the caller asks for it
        let first_param = self.layers.iter().position(|l| !l.params.is_empty());
        let mut g = upstream.clone();
        for (i, (layer, cache)) in self.layers.iter_mut().zip(caches).enumerate().rev() {
            let want_dx = need_input || first_param.is_some_and(|f| i > f);
            g = match cache {
                Cache::Affine {
                    input,
                    output,
                    activation,
                } => {
                    let pre = match &output {
                        Some(out) => activation.backward(out, &g)?,
                        None => g,
                    };
                    let (dw, db, dx) = match layer.kind {
                        LayerKind::Dense { .. } => {
                            let r = dense_backward(&input, &layer.params[0], &pre, want_dx)?;
                            (r.weights, r.bias, r.input)
                        }
                        _ => {
                            let r = conv2d_backward(&input, &layer.params[0], &pre, want_dx)?;
                            (r.kernels, r.bias, r.input)
                        }
                    };
                    layer.grads[0] = dw;
                    layer.grads[1] = db;
                    match dx {
                        Some(dx) => dx,
                        None => return Ok(None),
                    }
                }
                Cache::Pool {
                    input_shape,
                    argmax,
                } => maxpool2d_backward(&input_shape, &argmax, &g)?,
                Cache::Flatten { input_shape } => g.reshape(input_shape)?,
                Cache::Dropout { mask: Some(mask) } => dropout_apply(&g, &mask)?,
                Cache::Dropout { mask: None } | Cache::Identity => g,
            };
        }
        Ok(Some(g))
    }
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match *shape {
        [d_in, d_out] => (d_in, d_out),
        [kh, kw, c, f] => (kh * kw * c, kh * kw * f),
        _ => (shape.iter().product(), shape.iter().product()),
    }
}

/// Stand-in generator for inference, where no layer draws randomness.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference draws no randomness")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("inference draws no randomness")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("inference draws no randomness")
    }
}
