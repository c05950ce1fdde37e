//! Joint multi-task training, the single-task baseline and evaluation under
//! random channel draws.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{self, ChannelConfig, ChannelRealization};
use crate::data::{epoch_batches, ImageSet};
use crate::error::{Error, Result};
use crate::model::{assemble, ConfigId, MtocSystem, ReceiverSpec};
use crate::nn::{softmax_cross_entropy, AdamConfig, AdamState};
use crate::rng::{self, Rng, Stream};
use crate::tasks::{relabel_for, TaskSpec};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every receiver trained with its own weight.
    Mtoc,
    /// Only receiver `k` (0-based) is trained; all other weights are zero.
    Stoc(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub mode: Mode,
}

impl TrainConfig {
    pub fn for_config(cfg: ConfigId) -> Self {
        TrainConfig {
            epochs: match cfg {
                ConfigId::CifarCnn => 20,
                _ => 10,
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be at least 1"));
        }
        Ok(())
    }

    /// Loss weights actually used for a system with the given weights.
    pub fn effective_weights(&self, weights: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            Mode::Mtoc => Ok(weights.to_vec()),
            Mode::Stoc(k) if k < weights.len() => Ok((0..weights.len())
                .map(|i| if i == k { 1.0 } else { 0.0 })
                .collect()),
            Mode::Stoc(k) => Err(Error::config(format!(
                "STOC task {k} does not exist among {} receivers",
                weights.len()
            ))),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            mode: Mode::Mtoc,
        }
    }
}

/// `sum_i w_i * L_i`.
pub fn joint_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::input(format!(
            "{} losses but {} weights",
            losses.len(),
            weights.len()
        )));
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
}

/// Channel uses per image to serve `n` receivers: one broadcast of `n_c`
/// symbols under MTOC, `n` separate transmissions under STOC.
pub fn channel_uses(mode: Mode, n: usize, n_c: usize) -> usize {
    match mode {
        Mode::Mtoc => n_c,
        Mode::Stoc(_) => n * n_c,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLosses {
    pub joint: f64,
    pub tasks: Vec<f64>,
}

/// One realization per receiver for a `[batch, n_c]` transmission.
pub fn draw_realizations(
    system: &MtocSystem,
    batch: usize,
    rngs: &mut [Rng],
) -> Result<Vec<ChannelRealization>> {
    if rngs.len() != system.len() {
        return Err(Error::dim(
            "draw_realizations streams",
            &[system.len()],
            &[rngs.len()],
        ));
    }
    let n_c = system.n_c();
    system
        .receivers
        .iter()
        .zip(rngs.iter_mut())
        .map(|(r, rng)| channel::realize(&r.channel, batch, n_c, rng))
        .collect()
}

fn check_step_inputs(
    system: &MtocSystem,
    labels: &[&[usize]],
    weights: &[f64],
    realizations: &[ChannelRealization],
) -> Result<()> {
    let n = system.len();
    if labels.len() != n || weights.len() != n || realizations.len() != n {
        return Err(Error::dim(
            "per-receiver inputs",
            &[n, n, n],
            &[labels.len(), weights.len(), realizations.len()],
        ));
    }
    Ok(())
}

/// One forward and backward pass over a batch with given channel
/// realizations. Fills the gradients of the encoder and of every decoder;
/// decoders with zero weight get zero gradients and contribute nothing to
/// the encoder gradient.
pub fn forward_backward(
    system: &mut MtocSystem,
    x: &Tensor,
    labels: &[&[usize]],
    weights: &[f64],
    realizations: &[ChannelRealization],
    dropout_rng: &mut Rng,
) -> Result<StepLosses> {
    check_step_inputs(system, labels, weights, realizations)?;
    let z = system.encoder.forward(x, true, dropout_rng)?;
    let (s, norms) = channel::normalize_power(&z)?;
    let mut ds = Tensor::zeros(s.shape().to_vec());
    let mut tasks = Vec::with_capacity(system.len());
    for (i, receiver) in system.receivers.iter_mut().enumerate() {
        let y = channel::apply(&s, &realizations[i])?;
        let logits = receiver.decoder.forward_logits(&y, true, dropout_rng)?;
        let ce = softmax_cross_entropy(&logits, labels[i])?;
        tasks.push(ce.loss);
        if weights[i] == 0.0 {
            receiver.decoder.zero_grads();
            continue;
        }
        let g = ce.grad(labels[i]).scale(weights[i]);
        let dy = receiver.decoder.backward(&g)?;
        ds.add_scaled(&channel::channel_backward(&dy, &realizations[i])?, 1.0)?;
    }
    let dz = channel::normalize_power_backward(&z, &norms, &ds)?;
    system.encoder.backward_params(&dz)?;
    Ok(StepLosses {
        joint: joint_loss(&tasks, weights)?,
        tasks,
    })
}

/// Inference-mode losses for a batch with given realizations. Pure.
pub fn forward_loss(
    system: &MtocSystem,
    x: &Tensor,
    labels: &[&[usize]],
    weights: &[f64],
    realizations: &[ChannelRealization],
) -> Result<StepLosses> {
    check_step_inputs(system, labels, weights, realizations)?;
    let (s, _) = channel::normalize_power(&system.encoder.infer(x)?)?;
    let tasks = system
        .receivers
        .iter()
        .zip(realizations)
        .zip(labels)
        .map(|((r, real), l)| {
            let logits = r.decoder.infer_logits(&channel::apply(&s, real)?)?;
            Ok(softmax_cross_entropy(&logits, l)?.loss)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StepLosses {
        joint: joint_loss(&tasks, weights)?,
        tasks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Joint loss of every batch, in order.
    pub loss_trajectory: Vec<f64>,
    /// Mean joint loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss per epoch and task.
    pub epoch_task_losses: Vec<Vec<f64>>,
    pub steps: u64,
}

/// Binary labels for every receiver's task over `data`.
pub fn task_labels(tasks: &[TaskSpec], data: &ImageSet) -> Result<Vec<Vec<usize>>> {
    tasks
        .iter()
        .map(|t| relabel_for(data.dataset, data.labels(), t))
        .collect()
}

fn check_data(system: &MtocSystem, data: &ImageSet) -> Result<()> {
    if system.encoder.spec().input_shape() != data.sample_shape() {
        return Err(Error::config(format!(
            "encoder expects samples of shape {:?}, data has {:?}",
            system.encoder.spec().input_shape(),
            data.sample_shape()
        )));
    }
    Ok(())
}

fn channel_streams(system: &MtocSystem, seed: u64) -> Vec<Rng> {
    system
        .receivers
        .iter()
        .enumerate()
        .map(|(i, r)| rng::stream(seed ^ r.channel.seed, Stream::Channel(i)))
        .collect()
}

pub fn train(system: &mut MtocSystem, data: &ImageSet, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(system, data, cfg, &mut |_, _| {})
}

/// As [`train`], calling `progress(epoch, mean_joint_loss)` after each epoch.
pub fn train_with_progress(
    system: &mut MtocSystem,
    data: &ImageSet,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    check_data(system, data)?;
    let weights = cfg.effective_weights(&system.weights())?;
    let labels = task_labels(&system.tasks(), data)?;

    let mut shuffle = rng::stream(cfg.seed, Stream::Shuffle);
    let mut dropout = rng::stream(cfg.seed, Stream::Dropout);
    let mut channels = channel_streams(system, cfg.seed);
    let mut enc_opt = AdamState::new(cfg.adam);
    let mut dec_opts: Vec<AdamState> = (0..system.len())
        .map(|_| AdamState::new(cfg.adam))
        .collect();

    let mut report = TrainReport {
        loss_trajectory: Vec::new(),
        epoch_losses: Vec::with_capacity(cfg.epochs),
        epoch_task_losses: Vec::with_capacity(cfg.epochs),
        steps: 0,
    };
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(data.len(), cfg.batch_size, &mut shuffle)?;
        let mut joint_sum = 0.0;
        let mut task_sums = vec![0.0; system.len()];
        for (b, idx) in batches.iter().enumerate() {
            let x = data.gather(idx)?;
            let batch_labels: Vec<Vec<usize>> = labels
                .iter()
                .map(|l| idx.iter().map(|&i| l[i]).collect())
                .collect();
            let label_refs: Vec<&[usize]> = batch_labels.iter().map(Vec::as_slice).collect();
            let realizations = draw_realizations(system, idx.len(), &mut channels)?;
            let losses = forward_backward(
                system,
                &x,
                &label_refs,
                &weights,
                &realizations,
                &mut dropout,
            )?;
            if let Some(bad) = core::iter::once(losses.joint)
                .chain(losses.tasks.iter().copied())
                .find(|l| !l.is_finite())
            {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss: bad,
                });
            }
            enc_opt.update(system.encoder.params_and_grads_mut())?;
            for (r, opt) in system.receivers.iter_mut().zip(dec_opts.iter_mut()) {
                opt.update(r.decoder.params_and_grads_mut())?;
            }
            report.loss_trajectory.push(losses.joint);
            report.steps += 1;
            joint_sum += losses.joint;
            for (s, l) in task_sums.iter_mut().zip(&losses.tasks) {
                *s += l;
            }
        }
        let nb = batches.len() as f64;
        report.epoch_losses.push(joint_sum / nb);
        report
            .epoch_task_losses
            .push(task_sums.iter().map(|s| s / nb).collect());
        progress(epoch, joint_sum / nb);
    }
    Ok(report)
}

/// A fresh encoder and a single decoder trained for `task` alone.
pub fn train_stoc_baseline(
    cfg: ConfigId,
    n_c: usize,
    task: TaskSpec,
    channel: ChannelConfig,
    data: &ImageSet,
    train_cfg: &TrainConfig,
) -> Result<(MtocSystem, TrainReport)> {
    let mut system = assemble(
        cfg,
        n_c,
        &[ReceiverSpec {
            channel,
            task,
            weight: 1.0,
        }],
        train_cfg.seed,
    )?;
    let tc = TrainConfig {
        mode: Mode::Stoc(0),
        ..*train_cfg
    };
    let report = train(&mut system, data, &tc)?;
    Ok((system, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Independent channel draws per test sample.
    pub trials: usize,
    pub seed: u64,
    /// Determines the channel-use accounting of the report.
    pub mode: Mode,
    /// Samples per inference chunk.
    pub chunk: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            trials: 10,
            seed: 0,
            mode: Mode::Mtoc,
            chunk: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: Vec<f64>,
    pub loss: Vec<f64>,
    pub correct: Vec<u64>,
    /// Decisions per task: samples times trials.
    pub total: u64,
    pub channel_uses_per_image: usize,
}

impl EvalReport {
    pub fn mean_accuracy(&self) -> f64 {
        self.accuracy.iter().sum::<f64>() / self.accuracy.len() as f64
    }
}

/// Accuracy of every receiver's argmax decision over `trials` fresh channel
/// draws per sample. Dropout is off and the system is not modified.
pub fn evaluate(system: &MtocSystem, data: &ImageSet, cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.trials == 0 || cfg.chunk == 0 {
        return Err(Error::config("trials and chunk size must be at least 1"));
    }
    check_data(system, data)?;
    if data.is_empty() {
        return Err(Error::state("cannot evaluate on an empty set"));
    }
    let labels = task_labels(&system.tasks(), data)?;
    let n = system.len();
    let mut channels = channel_streams(system, rng::derive_seed(cfg.seed, Stream::Eval));
    let mut correct = vec![0u64; n];
    let mut loss_sum = vec![0.0; n];
    let mut start = 0;
    while start < data.len() {
        let end = (start + cfg.chunk).min(data.len());
        let x = data.gather_range(start, end)?;
        let (s, _) = channel::normalize_power(&system.encoder.infer(&x)?)?;
        for _ in 0..cfg.trials {
            for (i, r) in system.receivers.iter().enumerate() {
                let real =
                    channel::realize(&r.channel, end - start, s.row_len(), &mut channels[i])?;
                let logits = r.decoder.infer_logits(&channel::apply(&s, &real)?)?;
                let truth = &labels[i][start..end];
                let ce = softmax_cross_entropy(&logits, truth)?;
                loss_sum[i] += ce.loss * (end - start) as f64;
                for (b, &t) in truth.iter().enumerate() {
                    let row = logits.row(b);
                    let predicted = (row[1] > row[0]) as usize;
                    correct[i] += (predicted == t) as u64;
                }
            }
        }
        start = end;
    }
    let total = (data.len() * cfg.trials) as u64;
    Ok(EvalReport {
        accuracy: correct.iter().map(|&c| c as f64 / total as f64).collect(),
        loss: loss_sum.iter().map(|&l| l / total as f64).collect(),
        correct,
        total,
        channel_uses_per_image: channel_uses(cfg.mode, n, system.n_c()),
    })
}
