//! Independent reference implementations used by the integration and
//! acceptance tests: brute-force loop versions of the forward layers and
//! central finite differences for every backward pass.

#![allow(dead_code)]

use mtoc_core::channel::{self, ChannelConfig, ChannelRealization};
use mtoc_core::model::{decoder_spec, MtocSystem, Receiver};
use mtoc_core::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_apply,
    maxpool2d_backward, maxpool2d_forward, softmax_cross_entropy, Activation, LayerKind, Network,
    NetworkSpec,
};
use mtoc_core::rng::{self, Rng};
use mtoc_core::tasks::{DatasetName, TaskSpec};
use mtoc_core::train::{forward_backward, forward_loss};
use mtoc_core::Tensor;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;
pub const FORWARD_TOL: f64 = 1e-6;

pub fn uniform(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

pub fn dense_oracle(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (batch, d_in, d_out) = (x.shape()[0], w.shape()[0], w.shape()[1]);
    let mut out = vec![0.0; batch * d_out];
    for i in 0..batch {
        for j in 0..d_out {
            let mut acc = b.data()[j];
            for k in 0..d_in {
                acc += x.data()[i * d_in + k] * w.data()[k * d_out + j];
            }
            out[i * d_out + j] = acc;
        }
    }
    out
}

pub fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor) -> Vec<f64> {
    let s = x.shape();
    let (batch, h, w, c) = (s[0], s[1], s[2], s[3]);
    let (kh, kw, f) = (k.shape()[0], k.shape()[1], k.shape()[3]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0.0; batch * oh * ow * f];
    for n in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for fi in 0..f {
                    let mut acc = b.data()[fi];
                    for dy in 0..kh {
                        for dx in 0..kw {
                            for ci in 0..c {
                                let xi = ((n * h + oy + dy) * w + ox + dx) * c + ci;
                                let ki = ((dy * kw + dx) * c + ci) * f + fi;
                                acc += x.data()[xi] * k.data()[ki];
                            }
                        }
                    }
                    out[((n * oh + oy) * ow + ox) * f + fi] = acc;
                }
            }
        }
    }
    out
}

pub fn pool_oracle(x: &Tensor, (ph, pw): (usize, usize)) -> Vec<f64> {
    let s = x.shape();
    let (batch, h, w, c) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / ph, w / pw);
    let mut out = Vec::new();
    for n in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ci in 0..c {
                    let mut m = f64::NEG_INFINITY;
                    for dy in 0..ph {
                        for dx in 0..pw {
                            m = m.max(
                                x.data()[((n * h + oy * ph + dy) * w + ox * pw + dx) * c + ci],
                            );
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `|a - n| / (|a| + |n|)` in the Euclidean norm; 0 when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`, coordinate by coordinate.
pub fn numeric_grad(x: &[f64], f: &mut dyn FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + FD_STEP;
            let up = f(&p);
            p[i] = x[i] - FD_STEP;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn with(t: &Tensor, data: &[f64]) -> Tensor {
    Tensor::new(t.shape().to_vec(), data.to_vec()).unwrap()
}

/// Projection onto fixed random weights turns any map into a scalar loss.
fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn dims(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

pub fn check_dense(rng: &mut Rng) -> f64 {
    let (b, d_in, d_out) = (dims(rng, 1, 6), dims(rng, 1, 16), dims(rng, 1, 16));
    let x = uniform(rng, &[b, d_in]);
    let w = uniform(rng, &[d_in, d_out]);
    let bias = uniform(rng, &[d_out]);
    let r = uniform(rng, &[b, d_out]);
    let g = dense_backward(&x, &w, &r, true).unwrap();
    let ex = rel_error(
        g.input.unwrap().data(),
        &numeric_grad(x.data(), &mut |p| {
            project(&dense_forward(&with(&x, p), &w, &bias).unwrap(), &r)
        }),
    );
    let ew = rel_error(
        g.weights.data(),
        &numeric_grad(w.data(), &mut |p| {
            project(&dense_forward(&x, &with(&w, p), &bias).unwrap(), &r)
        }),
    );
    let eb = rel_error(
        g.bias.data(),
        &numeric_grad(bias.data(), &mut |p| {
            project(&dense_forward(&x, &w, &with(&bias, p)).unwrap(), &r)
        }),
    );
    ex.max(ew).max(eb)
}

pub fn check_conv(rng: &mut Rng) -> f64 {
    let (kh, kw) = (dims(rng, 1, 3), dims(rng, 1, 3));
    let (b, h, w) = (dims(rng, 1, 2), dims(rng, kh, 8), dims(rng, kw, 8));
    let (c, f) = (dims(rng, 1, 3), dims(rng, 1, 4));
    let x = uniform(rng, &[b, h, w, c]);
    let k = uniform(rng, &[kh, kw, c, f]);
    let bias = uniform(rng, &[f]);
    let r = uniform(rng, &[b, h - kh + 1, w - kw + 1, f]);
    let g = conv2d_backward(&x, &k, &r, true).unwrap();
    let ex = rel_error(
        g.input.unwrap().data(),
        &numeric_grad(x.data(), &mut |p| {
            project(&conv2d_forward(&with(&x, p), &k, &bias).unwrap(), &r)
        }),
    );
    let ek = rel_error(
        g.kernels.data(),
        &numeric_grad(k.data(), &mut |p| {
            project(&conv2d_forward(&x, &with(&k, p), &bias).unwrap(), &r)
        }),
    );
    let eb = rel_error(
        g.bias.data(),
        &numeric_grad(bias.data(), &mut |p| {
            project(&conv2d_forward(&x, &k, &with(&bias, p)).unwrap(), &r)
        }),
    );
    ex.max(ek).max(eb)
}

pub fn check_pool(rng: &mut Rng) -> f64 {
    let (ph, pw) = (dims(rng, 1, 3), dims(rng, 1, 3));
    let (b, h, w, c) = (
        dims(rng, 1, 2),
        dims(rng, ph, 12),
        dims(rng, pw, 12),
        dims(rng, 1, 3),
    );
    let x = uniform(rng, &[b, h, w, c]);
    let pooled = maxpool2d_forward(&x, (ph, pw)).unwrap();
    let r = uniform(rng, pooled.output.shape());
    let g = maxpool2d_backward(x.shape(), &pooled.argmax, &r).unwrap();
    let n = numeric_grad(x.data(), &mut |p| {
        project(
            &maxpool2d_forward(&with(&x, p), (ph, pw)).unwrap().output,
            &r,
        )
    });
    rel_error(g.data(), &n)
}

pub fn check_dropout(rng: &mut Rng) -> f64 {
    let shape = [dims(rng, 1, 4), dims(rng, 1, 16)];
    let x = uniform(rng, &shape);
    let rate = rng.random_range(0.0..0.9);
    let (_, mask) = mtoc_core::nn::dropout_forward(&x, rate, true, rng).unwrap();
    let mask = mask.unwrap_or_else(|| vec![1.0; x.len()]);
    let r = uniform(rng, &shape);
    let g = dropout_apply(&r, &mask).unwrap();
    let n = numeric_grad(x.data(), &mut |p| {
        project(&dropout_apply(&with(&x, p), &mask).unwrap(), &r)
    });
    rel_error(g.data(), &n)
}

pub fn check_softmax_ce(rng: &mut Rng) -> f64 {
    let (b, k) = (dims(rng, 1, 8), dims(rng, 2, 16));
    let logits = uniform(rng, &[b, k]).scale(3.0);
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
    let g = softmax_cross_entropy(&logits, &labels)
        .unwrap()
        .grad(&labels);
    let n = numeric_grad(logits.data(), &mut |p| {
        softmax_cross_entropy(&with(&logits, p), &labels)
            .unwrap()
            .loss
    });
    rel_error(g.data(), &n)
}

/// ReLU and softmax layers inside a network, through `Network::backward`.
pub fn check_activations(rng: &mut Rng) -> f64 {
    let d_in = dims(rng, 1, 8);
    let spec = NetworkSpec::new(
        vec![d_in],
        vec![
            LayerKind::dense(dims(rng, 1, 16), Activation::ReLU),
            LayerKind::dense(dims(rng, 2, 6), Activation::Softmax),
        ],
    )
    .unwrap();
    let mut net = Network::new(spec, rng);
    let b = dims(rng, 1, 4);
    let x = uniform(rng, &[b, d_in]);
    let out = net.forward(&x, true, rng).unwrap();
    let r = uniform(rng, out.shape());
    let dx = net.backward(&r).unwrap();
    let n = numeric_grad(x.data(), &mut |p| {
        project(&net.infer(&with(&x, p)).unwrap(), &r)
    });
    rel_error(dx.data(), &n)
}

pub fn check_channel(rng: &mut Rng) -> f64 {
    let (b, n_c) = (dims(rng, 1, 8), dims(rng, 1, 16));
    let cfg = ChannelConfig {
        block_fading: rng.random(),
        ..ChannelConfig::rayleigh(rng.random_range(-3.0..9.0))
    };
    let z = uniform(rng, &[b, n_c]);
    let (_, real) = channel::channel_forward(&z, &cfg, rng).unwrap();
    let r = uniform(rng, &[b, n_c]);
    let g = channel::channel_backward(&r, &real).unwrap();
    let n = numeric_grad(z.data(), &mut |p| {
        project(&channel::apply(&with(&z, p), &real).unwrap(), &r)
    });
    rel_error(g.data(), &n)
}

pub fn check_power_norm(rng: &mut Rng) -> f64 {
    let (b, n_c) = (dims(rng, 1, 8), dims(rng, 2, 16));
    let z = uniform(rng, &[b, n_c]).scale(rng.random_range(0.1..10.0));
    let (_, norms) = channel::normalize_power(&z).unwrap();
    let r = uniform(rng, &[b, n_c]);
    let g = channel::normalize_power_backward(&z, &norms, &r).unwrap();
    let n = numeric_grad(z.data(), &mut |p| {
        project(&channel::normalize_power(&with(&z, p)).unwrap().0, &r)
    });
    rel_error(g.data(), &n)
}

/// A small conv encoder with two decoders behind Rayleigh channels.
pub fn small_system(rng: &mut Rng) -> MtocSystem {
    let n_c = 4;
    let enc = NetworkSpec::new(
        vec![6, 6, 1],
        vec![
            LayerKind::conv(3, (3, 3), Activation::ReLU),
            LayerKind::maxpool((2, 2)),
            LayerKind::Flatten,
            LayerKind::dense(5, Activation::ReLU),
            LayerKind::dense(n_c, Activation::Linear),
        ],
    )
    .unwrap();
    let encoder = Network::new(enc, rng);
    let receivers = (0..2)
        .map(|i| Receiver {
            channel: ChannelConfig::rayleigh(3.0),
            decoder: Network::new(decoder_spec(n_c).unwrap(), rng),
            task: TaskSpec::window(DatasetName::Mnist, i + 1).unwrap(),
            weight: [0.7, 0.3][i],
        })
        .collect();
    let mut system = MtocSystem::from_parts(encoder, receivers).unwrap();
    jitter(&mut system, rng);
    system
}

/// Adds uniform noise to every parameter so no ReLU sits exactly on its kink
/// (zero-initialized biases otherwise put dead units at 0).
pub fn jitter(system: &mut MtocSystem, rng: &mut Rng) {
    for net in 0..=system.len() {
        let n = net_mut(system, net);
        let count = n.params().count();
        for t in 0..count {
            for v in n.param_mut(t).unwrap().data_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
    }
}

/// Worst relative error over every parameter tensor of `system` for the joint
/// loss with frozen realizations. `coords` limits the coordinates perturbed
/// per tensor (evenly spaced); `None` perturbs all of them.
pub fn check_system(
    system: &MtocSystem,
    x: &Tensor,
    labels: &[Vec<usize>],
    realizations: &[ChannelRealization],
    coords: Option<usize>,
) -> f64 {
    let weights = system.weights();
    let refs: Vec<&[usize]> = labels.iter().map(Vec::as_slice).collect();
    let mut sys = system.clone();
    forward_backward(
        &mut sys,
        x,
        &refs,
        &weights,
        realizations,
        &mut rng::from_seed(0),
    )
    .unwrap();

    let loss = |s: &MtocSystem| {
        forward_loss(s, x, &refs, &weights, realizations)
            .unwrap()
            .joint
    };
    let mut worst: f64 = 0.0;
    let nets = 1 + system.len();
    for net in 0..nets {
        let analytic: Vec<Tensor> = net_mut(&mut sys, net).grads().cloned().collect();
        for (t, grad) in analytic.iter().enumerate() {
            let len = grad.len();
            let picks: Vec<usize> = match coords {
                Some(k) if k < len => (0..k).map(|i| i * len / k).collect(),
                _ => (0..len).collect(),
            };
            let mut probe = system.clone();
            let mut a = Vec::new();
            let mut n = Vec::new();
            for &i in &picks {
                let orig = net_mut(&mut probe, net).param_mut(t).unwrap().data()[i];
                let mut at = |v: f64| {
                    net_mut(&mut probe, net).param_mut(t).unwrap().data_mut()[i] = v;
                    loss(&probe)
                };
                let up = at(orig + FD_STEP);
                let down = at(orig - FD_STEP);
                at(orig);
                a.push(grad.data()[i]);
                n.push((up - down) / (2.0 * FD_STEP));
            }
            worst = worst.max(rel_error(&a, &n));
        }
    }
    worst
}

fn net_mut(s: &mut MtocSystem, net: usize) -> &mut Network {
    if net == 0 {
        &mut s.encoder
    } else {
        &mut s.receivers[net - 1].decoder
    }
}

pub fn check_small_system(rng: &mut Rng) -> f64 {
    let system = small_system(rng);
    let b = dims(rng, 2, 5);
    let x = Tensor::from_fn(vec![b, 6, 6, 1], |_| rng.random());
    let labels: Vec<Vec<usize>> = (0..2)
        .map(|_| (0..b).map(|_| rng.random_range(0..2)).collect())
        .collect();
    let realizations: Vec<ChannelRealization> = system
        .receivers
        .iter()
        .map(|r| channel::realize(&r.channel, b, system.n_c(), rng).unwrap())
        .collect();
    check_system(&system, &x, &labels, &realizations, None)
}

pub type Check = fn(&mut Rng) -> f64;

pub const GRADIENT_CHECKS: [(&str, Check); 9] = [
    ("dense", check_dense),
    ("conv2d", check_conv),
    ("maxpool2d", check_pool),
    ("dropout (frozen mask)", check_dropout),
    ("softmax cross-entropy", check_softmax_ce),
    ("relu/softmax activations", check_activations),
    ("channel (frozen realization)", check_channel),
    ("power normalization", check_power_norm),
    ("encoder+decoders stack", check_small_system),
];

/// Worst relative error of each gradient check over `cases` random cases.
pub fn gradient_suite(seed: u64, cases: usize) -> Vec<(&'static str, f64)> {
    let mut rng = rng::from_seed(seed);
    GRADIENT_CHECKS
        .iter()
        .map(|&(name, check)| {
            (
                name,
                (0..cases).map(|_| check(&mut rng)).fold(0.0, f64::max),
            )
        })
        .collect()
}

/// Worst deviation from the loop oracles for dense, conv2d and maxpool over
/// `cases` random cases each.
pub fn forward_suite(seed: u64, cases: usize) -> Vec<(&'static str, f64)> {
    let mut rng = rng::from_seed(seed);
    let (mut dense, mut conv, mut pool) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let (b, d_in, d_out) = (
            dims(&mut rng, 1, 8),
            dims(&mut rng, 1, 16),
            dims(&mut rng, 1, 16),
        );
        let x = uniform(&mut rng, &[b, d_in]);
        let w = uniform(&mut rng, &[d_in, d_out]);
        let bias = uniform(&mut rng, &[d_out]);
        dense = dense.max(max_abs_diff(
            dense_forward(&x, &w, &bias).unwrap().data(),
            &dense_oracle(&x, &w, &bias),
        ));

        let (kh, kw) = (dims(&mut rng, 1, 4), dims(&mut rng, 1, 4));
        let (h, w_) = (dims(&mut rng, kh, 12), dims(&mut rng, kw, 12));
        let (c, f) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 5));
        let b = dims(&mut rng, 1, 3);
        let x = uniform(&mut rng, &[b, h, w_, c]);
        let k = uniform(&mut rng, &[kh, kw, c, f]);
        let bias = uniform(&mut rng, &[f]);
        conv = conv.max(max_abs_diff(
            conv2d_forward(&x, &k, &bias).unwrap().data(),
            &conv_oracle(&x, &k, &bias),
        ));

        let (ph, pw) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 3));
        let shape = [
            dims(&mut rng, 1, 3),
            dims(&mut rng, ph, 12),
            dims(&mut rng, pw, 12),
            c,
        ];
        let x = uniform(&mut rng, &shape);
        pool = pool.max(max_abs_diff(
            maxpool2d_forward(&x, (ph, pw)).unwrap().output.data(),
            &pool_oracle(&x, (ph, pw)),
        ));
    }
    vec![("dense", dense), ("conv2d", conv), ("maxpool2d", pool)]
}
