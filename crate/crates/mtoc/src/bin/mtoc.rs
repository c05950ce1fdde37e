use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtoc::checkpoint;
use mtoc::config::{
    ExperimentConfig, ModeKey, Preset, DEFAULT_NC_SWEEP, DEFAULT_RECEIVER_SWEEP, DEFAULT_SNR_SWEEP,
    DEFAULT_W1_SWEEP,
};
use mtoc::datasets::{load_dataset, resolve_data_dir, LoadedDataset};
use mtoc::harness::{self, Point, PointMode, Row, RunManifest, SweepResult};
use mtoc_core::tasks::DatasetName;
use mtoc_core::train::evaluate;

#[derive(Parser)]
#[command(
    name = "mtoc",
    version,
    about = "Multi-receiver task-oriented communications experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train and evaluate one configuration.
    Train,
    /// Symmetric SNR sweep.
    SweepSnr,
    /// Encoder output size sweep.
    SweepNc,
    /// One receiver's SNR swept, the other fixed.
    SweepAsym,
    /// Weight sweep with w2 = 1 - w1.
    SweepWeights,
    /// MTOC against STOC-task-1 over the receiver count.
    SweepReceivers,
    /// Evaluate a saved checkpoint on the test split.
    Eval,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::SweepSnr => "sweep-snr",
            Command::SweepNc => "sweep-nc",
            Command::SweepAsym => "sweep-asym",
            Command::SweepWeights => "sweep-weights",
            Command::SweepReceivers => "sweep-receivers",
            Command::Eval => "eval",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Timing {
    On,
    Off,
}

#[derive(Args)]
struct Opts {
    #[arg(long, global = true, value_parser = ["mnist", "fashion", "cifar10"])]
    dataset: Option<String>,
    #[arg(long = "nc", global = true)]
    n_c: Option<usize>,
    /// One value, or one per receiver.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Task ids, e.g. `mnist.parity,window:3`.
    #[arg(long, global = true, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    #[arg(long, global = true)]
    receivers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeKey>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long = "batch", global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    #[arg(long, global = true)]
    train_samples: Option<usize>,
    #[arg(long, global = true)]
    test_samples: Option<usize>,
    /// Channel draws per test sample.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// CSV output; a manifest and the resolved config are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "MTOC_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// TOML experiment config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sweep grid for the chosen sweep command.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    sweep: Option<Vec<f64>>,
    /// 0-based receiver whose SNR moves in `sweep-asym`.
    #[arg(long, global = true)]
    vary_receiver: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "on")]
    timing: Timing,
    /// Checkpoint written by `train` or read by `eval`.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> ExperimentConfig {
        ExperimentConfig {
            dataset: self.dataset.clone(),
            n_c: self.n_c,
            snr_db: self.snr_db.clone(),
            weights: self.weights.clone(),
            tasks: self.tasks.clone(),
            receivers: self.receivers,
            mode: self.mode,
            preset: self.preset,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            train_samples: self.train_samples,
            test_samples: self.test_samples,
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
            data_dir: self.data_dir.clone(),
            ..Default::default()
        }
    }
}

fn as_counts(v: &[f64], what: &str) -> anyhow::Result<Vec<usize>> {
    v.iter()
        .map(|&x| {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                bail!("{what} must be a non-negative integer, got {x}")
            }
        })
        .collect()
}

/// Folds `--sweep` and `--vary-receiver` into the config's sweep lists.
fn apply_sweep_flags(cmd: Command, opts: &Opts, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
    if let Some(v) = &opts.sweep {
        match cmd {
            Command::SweepSnr | Command::SweepAsym => cfg.sweep.snr_db = v.clone(),
            Command::SweepNc => cfg.sweep.n_c = as_counts(v, "n_c")?,
            Command::SweepWeights => cfg.sweep.w1 = v.clone(),
            Command::SweepReceivers => cfg.sweep.receivers = as_counts(v, "receiver count")?,
            _ => bail!("--sweep only applies to sweep commands"),
        }
    }
    if opts.vary_receiver.is_some() {
        cfg.sweep.vary_receiver = opts.vary_receiver;
    }
    let s = &mut cfg.sweep;
    match cmd {
        Command::SweepSnr | Command::SweepAsym if s.snr_db.is_empty() => {
            s.snr_db = DEFAULT_SNR_SWEEP.to_vec()
        }
        Command::SweepNc if s.n_c.is_empty() => s.n_c = DEFAULT_NC_SWEEP.to_vec(),
        Command::SweepWeights if s.w1.is_empty() => s.w1 = DEFAULT_W1_SWEEP.to_vec(),
        Command::SweepReceivers if s.receivers.is_empty() => {
            s.receivers = DEFAULT_RECEIVER_SWEEP.to_vec()
        }
        _ => {}
    }
    Ok(())
}

fn load(name: DatasetName, cfg: &ExperimentConfig) -> anyhow::Result<LoadedDataset> {
    let dir = resolve_data_dir(cfg.data_dir.as_deref());
    let loaded = load_dataset(name, &dir)
        .with_context(|| format!("loading {name} from {}", dir.display()))?;
    for f in loaded.unverified() {
        eprintln!(
            "warning: no recorded hash for {}; sha256 {}",
            f.path, f.sha256
        );
    }
    Ok(loaded)
}

fn report(p: &Point, rows: &[Row]) {
    for r in rows {
        match &r.outcome {
            Ok((acc, loss)) => eprintln!(
                "[{} {}] n_c={} snr={:?} w={:?} {}: accuracy {acc:.4} loss {loss:.4} ({:.1}s)",
                p.index, r.mode, r.n_c, r.snr_db, r.weights, r.task_id, r.wall_s
            ),
            Err(e) => eprintln!("[{} {}] {}: FAILED: {e}", p.index, r.mode, r.task_id),
        }
    }
}

fn output(
    cmd: Command,
    cfg: &ExperimentConfig,
    files: Vec<mtoc::datasets::FileRecord>,
    points: &[Point],
    result: &SweepResult,
    timing: bool,
) -> anyhow::Result<()> {
    match &cfg.out {
        Some(path) => {
            let manifest =
                RunManifest::new(cmd.name(), cfg.to_toml(), files, points, result, timing);
            harness::emit(path, &result.rows, &manifest, timing)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", harness::csv_string(&result.rows, timing)),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cmd = cli.command;
    let opts = &cli.opts;
    let file = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = file.merge(opts.overrides());
    apply_sweep_flags(cmd, opts, &mut cfg)?;
    let timing = opts.timing == Timing::On;

    if cmd == Command::Eval {
        return eval(opts, &cfg, timing);
    }

    let base = cfg.resolve()?;
    let loaded = load(base.dataset, &cfg)?;
    let data = &loaded.dataset;
    let points = match cmd {
        Command::Train => harness::single(&base),
        Command::SweepSnr => harness::sweep_snr(&base, &cfg.sweep.snr_db)?,
        Command::SweepNc => harness::sweep_nc(&base, &cfg.sweep.n_c)?,
        Command::SweepAsym => harness::sweep_asym(
            &base,
            cfg.sweep.vary_receiver.unwrap_or(0),
            &cfg.sweep.snr_db,
        )?,
        Command::SweepWeights => harness::sweep_weights(&base, &cfg.sweep.w1)?,
        Command::SweepReceivers => harness::sweep_receivers(&base, &cfg.sweep.receivers)?,
        Command::Eval => unreachable!(),
    };

    let result = if cmd == Command::Train {
        let p = &points[0];
        let start = Instant::now();
        let trained = harness::train_point(&p.spec, p.mode, data);
        let wall = start.elapsed().as_secs_f64();
        if let (Some(path), Ok(t)) = (&opts.checkpoint, &trained) {
            for (i, system) in t.systems.iter().enumerate() {
                let path = if t.systems.len() == 1 {
                    path.clone()
                } else {
                    path.with_extension(format!("task{i}.ckpt"))
                };
                let extra = serde_json::json!({
                    "mode": p.mode.key(),
                    "epochs": p.spec.train.epochs,
                    "seed": p.spec.train.seed,
                    "config": cfg.to_toml(),
                });
                checkpoint::save(&path, system, &extra)?;
                eprintln!("saved {}", path.display());
            }
        }
        let trajectories = trained
            .as_ref()
            .map(|t| t.trajectories.clone())
            .unwrap_or_default();
        let rows = harness::rows_for(p, &trained.map_err(|e| e.to_string()), wall);
        report(p, &rows);
        SweepResult {
            rows,
            trajectories: vec![trajectories],
        }
    } else {
        harness::run(&points, data, &mut report)
    };
    output(cmd, &cfg, loaded.files, &points, &result, timing)?;
    Ok(result.rows.iter().all(|r| r.outcome.is_ok()))
}

fn eval(opts: &Opts, cfg: &ExperimentConfig, timing: bool) -> anyhow::Result<bool> {
    let Some(path) = &opts.checkpoint else {
        bail!("eval needs --checkpoint");
    };
    let ckpt = checkpoint::load(path).with_context(|| format!("reading {}", path.display()))?;
    let system = ckpt.system;
    let dataset = system.receivers[0].task.dataset;
    let loaded = load(dataset, cfg)?;
    let test = harness::subset(&loaded.dataset.test, cfg.test_samples);
    let seed = cfg.seed.unwrap_or(0);
    let eval_cfg = mtoc_core::train::EvalConfig {
        trials: cfg
            .trials
            .unwrap_or(mtoc_core::train::EvalConfig::default().trials),
        seed,
        ..Default::default()
    };
    let start = Instant::now();
    let report_ = evaluate(&system, &test, &eval_cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let mode = match ckpt.extra.get("mode").and_then(|m| m.as_str()) {
        Some("stoc") => PointMode::Stoc,
        _ => PointMode::Mtoc,
    };
    let epochs = ckpt
        .extra
        .get("epochs")
        .and_then(|e| e.as_u64())
        .unwrap_or(0) as usize;
    let rows: Vec<Row> = system
        .receivers
        .iter()
        .enumerate()
        .map(|(i, r)| Row {
            point: 0,
            dataset: dataset.key().to_string(),
            mode: mode.key().to_string(),
            n: system.len(),
            n_c: system.n_c(),
            snr_db: system.receivers.iter().map(|r| r.channel.snr_db).collect(),
            weights: system.weights(),
            task_id: r.task.id(),
            outcome: Ok((report_.accuracy[i], report_.loss[i])),
            channel_uses: report_.channel_uses_per_image,
            seed,
            epochs,
            wall_s: wall,
        })
        .collect();
    for r in &rows {
        eprintln!(
            "{}: accuracy {:.4}",
            r.task_id,
            r.accuracy().unwrap_or(f64::NAN)
        );
    }
    match &cfg.out {
        Some(out) => harness::write_csv(&rows, std::fs::File::create(out)?, timing)?,
        None => print!("{}", harness::csv_string(&rows, timing)),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some rows failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
