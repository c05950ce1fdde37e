//! Experiment configuration: a TOML file, command-line overrides and presets,
//! resolved into concrete run settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use mtoc_core::channel::{ChannelConfig, Fading};
use mtoc_core::model::{ConfigId, ReceiverSpec};
use mtoc_core::nn::AdamConfig;
use mtoc_core::tasks::{DatasetName, NamedTask, TaskSpec};
use mtoc_core::train::{EvalConfig, Mode, TrainConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SNR_DB: f64 = 3.0;
pub const DEFAULT_NC: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 10k training samples, 3 epochs.
    Desk,
    /// Full training split and the default epoch count.
    Full,
}

impl Preset {
    pub fn train_samples(self) -> Option<usize> {
        match self {
            Preset::Desk => Some(10_000),
            Preset::Full => None,
        }
    }

    pub fn epochs(self, cfg: ConfigId) -> usize {
        match self {
            Preset::Desk => 3,
            Preset::Full => TrainConfig::for_config(cfg).epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeKey {
    #[default]
    Mtoc,
    Stoc,
}

impl ModeKey {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeKey::Mtoc => "mtoc",
            ModeKey::Stoc => "stoc",
        }
    }
}

/// Everything an experiment can set. Unset fields take defaults during
/// [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<String>,
    pub n_c: Option<usize>,
    /// One value for every receiver, or one per receiver.
    pub snr_db: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    /// Task ids such as `mnist.parity` or `window:3`.
    pub tasks: Option<Vec<String>>,
    /// Receiver count; without explicit tasks this selects window tasks.
    pub receivers: Option<usize>,
    pub mode: Option<ModeKey>,
    pub preset: Option<Preset>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub train_samples: Option<usize>,
    pub test_samples: Option<usize>,
    pub trials: Option<usize>,
    pub block_fading: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub sweep: SweepLists,
}

/// Sweep grids; empty lists take the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepLists {
    pub snr_db: Vec<f64>,
    pub n_c: Vec<usize>,
    pub w1: Vec<f64>,
    pub receivers: Vec<usize>,
    /// 0-based receiver whose SNR moves in the asymmetric sweep.
    pub vary_receiver: Option<usize>,
}

pub const DEFAULT_SNR_SWEEP: [f64; 5] = [-3.0, 0.0, 3.0, 6.0, 9.0];
pub const DEFAULT_NC_SWEEP: [usize; 5] = [4, 8, 12, 16, 20];
pub const DEFAULT_W1_SWEEP: [f64; 7] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const DEFAULT_RECEIVER_SWEEP: [usize; 5] = [2, 3, 4, 5, 6];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            dataset,
            n_c,
            snr_db,
            weights,
            tasks,
            receivers,
            mode,
            preset,
            epochs,
            batch_size,
            learning_rate,
            train_samples,
            test_samples,
            trials,
            block_fading,
            seed,
            out,
            data_dir
        );
        let s = other.sweep;
        if !s.snr_db.is_empty() {
            self.sweep.snr_db = s.snr_db;
        }
        if !s.n_c.is_empty() {
            self.sweep.n_c = s.n_c;
        }
        if !s.w1.is_empty() {
            self.sweep.w1 = s.w1;
        }
        if !s.receivers.is_empty() {
            self.sweep.receivers = s.receivers;
        }
        if s.vary_receiver.is_some() {
            self.sweep.vary_receiver = s.vary_receiver;
        }
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config always serializes")
    }

    pub fn resolve(&self) -> anyhow::Result<RunSpec> {
        let dataset: DatasetName = match &self.dataset {
            Some(d) => d.parse()?,
            None => DatasetName::Mnist,
        };
        let cfg = ConfigId::for_dataset(dataset);
        let tasks: Vec<TaskSpec> = match (&self.tasks, self.receivers) {
            (Some(ids), n) => {
                let tasks = ids
                    .iter()
                    .map(|s| TaskSpec::parse(dataset, s))
                    .collect::<mtoc_core::Result<Vec<_>>>()?;
                if let Some(n) = n {
                    ensure!(
                        n == tasks.len(),
                        "{} tasks listed for {n} receivers",
                        tasks.len()
                    );
                }
                tasks
            }
            (None, Some(n)) => window_tasks(dataset, n)?,
            (None, None) => NamedTask::pair(dataset)
                .into_iter()
                .map(TaskSpec::named)
                .collect(),
        };
        let n = tasks.len();
        ensure!(n >= 1, "at least one receiver is required");
        let weights = match &self.weights {
            Some(w) => w.clone(),
            None if self.receivers.is_some() => vec![1.0 / n as f64; n],
            None if n == 2 => vec![0.5, 0.5],
            None => vec![1.0 / n as f64; n],
        };
        ensure!(
            weights.len() == n,
            "{} weights for {n} receivers",
            weights.len()
        );
        let snr_db = broadcast(
            self.snr_db.clone().unwrap_or_else(|| vec![DEFAULT_SNR_DB]),
            n,
            "snr_db",
        )?;
        let preset = self.preset;
        let epochs = self
            .epochs
            .or(preset.map(|p| p.epochs(cfg)))
            .unwrap_or_else(|| TrainConfig::for_config(cfg).epochs);
        let train_samples = self
            .train_samples
            .or(preset.and_then(Preset::train_samples));
        let mut adam = AdamConfig::default();
        if let Some(lr) = self.learning_rate {
            adam.lr = lr;
        }
        let train = TrainConfig {
            epochs,
            batch_size: self.batch_size.unwrap_or(TrainConfig::default().batch_size),
            adam,
            seed: self.seed.unwrap_or(0),
            mode: Mode::Mtoc,
        };
        train.validate()?;
        let spec = RunSpec {
            dataset,
            n_c: self.n_c.unwrap_or(DEFAULT_NC),
            snr_db,
            weights,
            tasks,
            mode: self.mode.unwrap_or_default(),
            train,
            train_samples,
            test_samples: self.test_samples,
            trials: self.trials.unwrap_or(EvalConfig::default().trials),
            block_fading: self.block_fading.unwrap_or(true),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn broadcast(v: Vec<f64>, n: usize, what: &str) -> anyhow::Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v),
        k => bail!("{what} has {k} values for {n} receivers"),
    }
}

/// `window:1 .. window:n`.
pub fn window_tasks(dataset: DatasetName, n: usize) -> anyhow::Result<Vec<TaskSpec>> {
    ensure!(n >= 1, "receiver count must be at least 1");
    Ok((1..=n)
        .map(|i| TaskSpec::window(dataset, i))
        .collect::<mtoc_core::Result<Vec<_>>>()?)
}

/// Windows repeat with period 10, so more receivers reuse tasks.
pub fn windows_repeat(n: usize) -> bool {
    n > mtoc_core::tasks::NUM_CLASSES
}

/// Concrete settings of one train + evaluate run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub dataset: DatasetName,
    pub n_c: usize,
    pub snr_db: Vec<f64>,
    pub weights: Vec<f64>,
    pub tasks: Vec<TaskSpec>,
    pub mode: ModeKey,
    pub train: TrainConfig,
    /// `None` uses the whole training split.
    pub train_samples: Option<usize>,
    pub test_samples: Option<usize>,
    pub trials: usize,
    pub block_fading: bool,
}

impl RunSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        let n = self.tasks.len();
        ensure!(self.n_c >= 2, "n_c must be at least 2, got {}", self.n_c);
        ensure!(
            self.weights.len() == n && self.snr_db.len() == n,
            "per-receiver lists must have {n} entries"
        );
        for &w in &self.weights {
            ensure!((0.0..=1.0).contains(&w), "weight {w} outside [0, 1]");
        }
        for &s in &self.snr_db {
            ensure!(!s.is_nan(), "snr_db is NaN");
        }
        for t in &self.tasks {
            ensure!(
                t.dataset == self.dataset,
                "task {} is not a {} task",
                t.id(),
                self.dataset
            );
        }
        ensure!(self.trials >= 1, "trials must be at least 1");
        Ok(())
    }

    pub fn config_id(&self) -> ConfigId {
        ConfigId::for_dataset(self.dataset)
    }

    pub fn n(&self) -> usize {
        self.tasks.len()
    }

    pub fn channel(&self, i: usize) -> ChannelConfig {
        ChannelConfig {
            snr_db: self.snr_db[i],
            fading: Fading::Rayleigh,
            block_fading: self.block_fading,
            seed: 0,
        }
    }

    pub fn receivers(&self) -> Vec<ReceiverSpec> {
        (0..self.n())
            .map(|i| ReceiverSpec {
                channel: self.channel(i),
                task: self.tasks[i],
                weight: self.weights[i],
            })
            .collect()
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            trials: self.trials,
            seed: self.train.seed,
            mode: Mode::Mtoc,
            ..EvalConfig::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.train.seed = seed;
        s
    }
}
