//! Experiment sweeps: independent train + evaluate runs per grid point,
//! written as CSV rows plus a JSON run manifest.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::ensure;
use mtoc_core::data::{Dataset, ImageSet};
use mtoc_core::model::{assemble, MtocSystem};
use mtoc_core::train::{self, evaluate, train_stoc_baseline, Mode, TrainConfig};
use serde::Serialize;

use crate::config::{windows_repeat, ModeKey, RunSpec};
use crate::datasets::{sha256_hex, FileRecord};

pub const CSV_HEADER: [&str; 13] = [
    "dataset",
    "mode",
    "n",
    "n_c",
    "snr_db_list",
    "weights",
    "task_id",
    "accuracy",
    "loss",
    "channel_uses",
    "seed",
    "epochs",
    "wall_s",
];

/// Written in the accuracy and loss columns of rows whose run failed.
pub const FAILED: &str = "error";

pub const RETRAINING_NOTE: &str =
    "every sweep point trains a fresh system at that point's settings";

/// How a point is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointMode {
    /// All receivers jointly with their weights.
    Mtoc,
    /// A separate single-task system per receiver.
    Stoc,
    /// Only receiver 0 is trained; every receiver is evaluated.
    StocFirst,
}

impl PointMode {
    pub fn key(self) -> &'static str {
        match self {
            PointMode::Mtoc => "mtoc",
            PointMode::Stoc | PointMode::StocFirst => "stoc",
        }
    }
}

impl From<ModeKey> for PointMode {
    fn from(m: ModeKey) -> Self {
        match m {
            ModeKey::Mtoc => PointMode::Mtoc,
            ModeKey::Stoc => PointMode::Stoc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub index: usize,
    pub spec: RunSpec,
    pub mode: PointMode,
    /// Adds a receiver-averaged row.
    pub average: bool,
}

/// Points are seeded with `base_seed ^ index`.
fn point(index: usize, base: &RunSpec, mode: PointMode, f: impl FnOnce(&mut RunSpec)) -> Point {
    let mut spec = base.with_seed(base.train.seed ^ index as u64);
    f(&mut spec);
    Point {
        index,
        spec,
        mode,
        average: false,
    }
}

/// A single run at the base settings.
pub fn single(base: &RunSpec) -> Vec<Point> {
    vec![Point {
        index: 0,
        spec: base.clone(),
        mode: base.mode.into(),
        average: false,
    }]
}

/// Symmetric SNR sweep.
pub fn sweep_snr(base: &RunSpec, snrs: &[f64]) -> anyhow::Result<Vec<Point>> {
    ensure!(!snrs.is_empty(), "empty SNR list");
    Ok(snrs
        .iter()
        .enumerate()
        .map(|(k, &s)| point(k, base, base.mode.into(), |p| p.snr_db = vec![s; p.n()]))
        .collect())
}

pub fn sweep_nc(base: &RunSpec, ncs: &[usize]) -> anyhow::Result<Vec<Point>> {
    ensure!(!ncs.is_empty(), "empty n_c list");
    ensure!(ncs.iter().all(|&n| n >= 2), "every n_c must be at least 2");
    Ok(ncs
        .iter()
        .enumerate()
        .map(|(k, &n_c)| point(k, base, base.mode.into(), |p| p.n_c = n_c))
        .collect())
}

/// Receiver `vary` takes each SNR in turn; the others keep the base SNR.
pub fn sweep_asym(base: &RunSpec, vary: usize, snrs: &[f64]) -> anyhow::Result<Vec<Point>> {
    ensure!(
        base.n() == 2,
        "the asymmetric sweep needs exactly 2 receivers, got {}",
        base.n()
    );
    ensure!(vary < 2, "receiver index {vary} out of range");
    ensure!(!snrs.is_empty(), "empty SNR list");
    Ok(snrs
        .iter()
        .enumerate()
        .map(|(k, &s)| point(k, base, base.mode.into(), |p| p.snr_db[vary] = s))
        .collect())
}

/// `w = (w1, 1 - w1)`.
pub fn sweep_weights(base: &RunSpec, w1s: &[f64]) -> anyhow::Result<Vec<Point>> {
    ensure!(
        base.n() == 2,
        "the weight sweep needs exactly 2 receivers, got {}",
        base.n()
    );
    ensure!(!w1s.is_empty(), "empty weight list");
    ensure!(
        w1s.iter().all(|w| (0.0..=1.0).contains(w)),
        "w1 values must lie in [0, 1]"
    );
    Ok(w1s
        .iter()
        .enumerate()
        .map(|(k, &w)| point(k, base, PointMode::Mtoc, |p| p.weights = vec![w, 1.0 - w]))
        .collect())
}

/// For each `n`: window tasks `1..=n`, an MTOC point with weights `1/n` and a
/// STOC point trained on task 1 only. Both share the seed of that `n`.
pub fn sweep_receivers(base: &RunSpec, ns: &[usize]) -> anyhow::Result<Vec<Point>> {
    ensure!(!ns.is_empty(), "empty receiver list");
    ensure!(
        ns.iter().all(|&n| n >= 2),
        "receiver counts must be at least 2"
    );
    let mut points = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let tasks = crate::config::window_tasks(base.dataset, n)?;
        let snr = base.snr_db[0];
        for mode in [PointMode::Mtoc, PointMode::StocFirst] {
            let mut p = point(k, base, mode, |p| {
                p.tasks = tasks.clone();
                p.snr_db = vec![snr; n];
                p.weights = match mode {
                    PointMode::Mtoc => vec![1.0 / n as f64; n],
                    _ => (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
                };
            });
            p.average = true;
            points.push(p);
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: usize,
    pub dataset: String,
    pub mode: String,
    pub n: usize,
    pub n_c: usize,
    pub snr_db: Vec<f64>,
    pub weights: Vec<f64>,
    pub task_id: String,
    /// `(accuracy, loss)` or the error message.
    pub outcome: Result<(f64, f64), String>,
    pub channel_uses: usize,
    pub seed: u64,
    pub epochs: usize,
    pub wall_s: f64,
}

impl Row {
    pub fn accuracy(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.0)
    }
}

/// The first `n` samples, or all of them.
pub fn subset(set: &ImageSet, n: Option<usize>) -> ImageSet {
    match n {
        Some(n) if n < set.len() => set.truncate(n),
        _ => set.clone(),
    }
}

/// A trained point: per-receiver `(accuracy, loss)`, the trained systems and
/// their loss trajectories.
#[derive(Debug, Clone)]
pub struct Trained {
    pub results: Vec<(f64, f64)>,
    pub systems: Vec<MtocSystem>,
    pub trajectories: Vec<Vec<f64>>,
}

fn train_config(spec: &RunSpec, mode: Mode) -> TrainConfig {
    TrainConfig { mode, ..spec.train }
}

pub fn train_point(spec: &RunSpec, mode: PointMode, data: &Dataset) -> mtoc_core::Result<Trained> {
    let train_set = subset(&data.train, spec.train_samples);
    let test_set = subset(&data.test, spec.test_samples);
    let eval_cfg = spec.eval_config();
    match mode {
        PointMode::Mtoc | PointMode::StocFirst => {
            let train_mode = if mode == PointMode::Mtoc {
                Mode::Mtoc
            } else {
                Mode::Stoc(0)
            };
            let mut system = assemble(
                spec.config_id(),
                spec.n_c,
                &spec.receivers(),
                spec.train.seed,
            )?;
            let report = train::train(&mut system, &train_set, &train_config(spec, train_mode))?;
            let eval = evaluate(&system, &test_set, &eval_cfg)?;
            Ok(Trained {
                results: eval.accuracy.into_iter().zip(eval.loss).collect(),
                systems: vec![system],
                trajectories: vec![report.loss_trajectory],
            })
        }
        PointMode::Stoc => {
            let mut out = Trained {
                results: Vec::new(),
                systems: Vec::new(),
                trajectories: Vec::new(),
            };
            for i in 0..spec.n() {
                let (system, report) = train_stoc_baseline(
                    spec.config_id(),
                    spec.n_c,
                    spec.tasks[i],
                    spec.channel(i),
                    &train_set,
                    &train_config(spec, Mode::Mtoc),
                )?;
                let eval = evaluate(&system, &test_set, &eval_cfg)?;
                out.results.push((eval.accuracy[0], eval.loss[0]));
                out.systems.push(system);
                out.trajectories.push(report.loss_trajectory);
            }
            Ok(out)
        }
    }
}

fn channel_uses(p: &Point) -> usize {
    match p.mode {
        PointMode::Mtoc => train::channel_uses(Mode::Mtoc, p.spec.n(), p.spec.n_c),
        _ => train::channel_uses(Mode::Stoc(0), p.spec.n(), p.spec.n_c),
    }
}

/// Rows of a finished (or failed) point.
pub fn rows_for(p: &Point, outcome: &Result<Trained, String>, wall_s: f64) -> Vec<Row> {
    let s = &p.spec;
    let row = |task_id: String, weights: Vec<f64>, outcome: Result<(f64, f64), String>| Row {
        point: p.index,
        dataset: s.dataset.key().to_string(),
        mode: p.mode.key().to_string(),
        n: s.n(),
        n_c: s.n_c,
        snr_db: s.snr_db.clone(),
        weights,
        task_id,
        outcome,
        channel_uses: channel_uses(p),
        seed: s.train.seed,
        epochs: s.train.epochs,
        wall_s,
    };
    let weights_for = |i: usize| match p.mode {
        PointMode::Mtoc => s.weights.clone(),
        PointMode::Stoc => (0..s.n()).map(|j| if j == i { 1.0 } else { 0.0 }).collect(),
        PointMode::StocFirst => (0..s.n()).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
    };
    let mut rows: Vec<Row> = (0..s.n())
        .map(|i| {
            let o = match outcome {
                Ok(t) => Ok(t.results[i]),
                Err(e) => Err(e.clone()),
            };
            row(s.tasks[i].id(), weights_for(i), o)
        })
        .collect();
    if p.average {
        let o = match outcome {
            Ok(t) => {
                let k = t.results.len() as f64;
                Ok((
                    t.results.iter().map(|r| r.0).sum::<f64>() / k,
                    t.results.iter().map(|r| r.1).sum::<f64>() / k,
                ))
            }
            Err(e) => Err(e.clone()),
        };
        rows.push(row("mean".into(), weights_for(0), o));
    }
    rows
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    /// Per point, the loss trajectory of every trained system.
    pub trajectories: Vec<Vec<Vec<f64>>>,
}

/// Runs every point in order. A failing point yields error rows and the
/// sweep continues.
pub fn run(
    points: &[Point],
    data: &Dataset,
    progress: &mut dyn FnMut(&Point, &[Row]),
) -> SweepResult {
    let mut result = SweepResult {
        rows: Vec::new(),
        trajectories: Vec::new(),
    };
    for p in points {
        let start = Instant::now();
        let outcome = p
            .spec
            .validate()
            .map_err(|e| e.to_string())
            .and_then(|_| train_point(&p.spec, p.mode, data).map_err(|e| e.to_string()));
        let rows = rows_for(p, &outcome, start.elapsed().as_secs_f64());
        progress(p, &rows);
        result
            .trajectories
            .push(outcome.map(|t| t.trajectories).unwrap_or_default());
        result.rows.extend(rows);
    }
    result
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// With `timing` off the `wall_s` column is left empty, so reruns are
/// byte-identical.
pub fn write_csv<W: Write>(rows: &[Row], out: W, timing: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let (acc, loss) = match &r.outcome {
            Ok((a, l)) => (a.to_string(), l.to_string()),
            Err(_) => (FAILED.to_string(), FAILED.to_string()),
        };
        w.write_record([
            r.dataset.clone(),
            r.mode.clone(),
            r.n.to_string(),
            r.n_c.to_string(),
            join(&r.snr_db),
            join(&r.weights),
            r.task_id.clone(),
            acc,
            loss,
            r.channel_uses.to_string(),
            r.seed.to_string(),
            r.epochs.to_string(),
            if timing {
                format!("{:.3}", r.wall_s)
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[Row], timing: bool) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf, timing).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedRow {
    pub row: usize,
    pub point: usize,
    pub task_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub code_version: String,
    pub command: String,
    /// SHA-256 of `resolved_config`.
    pub config_hash: String,
    pub resolved_config: String,
    pub dataset_files: Vec<FileRecord>,
    pub rows: usize,
    pub failed_rows: Vec<FailedRow>,
    /// True when some point has more than 10 window tasks, which repeat.
    pub window_repetition: bool,
    pub retraining: String,
    pub timing: bool,
}

impl RunManifest {
    pub fn new(
        command: &str,
        resolved_config: String,
        dataset_files: Vec<FileRecord>,
        points: &[Point],
        result: &SweepResult,
        timing: bool,
    ) -> Self {
        let failed_rows = result
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.outcome.as_ref().err().map(|e| FailedRow {
                    row: i,
                    point: r.point,
                    task_id: r.task_id.clone(),
                    error: e.clone(),
                })
            })
            .collect();
        RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(resolved_config.as_bytes()),
            resolved_config,
            dataset_files,
            rows: result.rows.len(),
            failed_rows,
            window_repetition: points.iter().any(|p| windows_repeat(p.spec.n())),
            retraining: RETRAINING_NOTE.to_string(),
            timing,
        }
    }
}

/// Writes `path` (CSV), `path.manifest.json` and `path.config.toml`.
pub fn emit(path: &Path, rows: &[Row], manifest: &RunManifest, timing: bool) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(rows, std::fs::File::create(path)?, timing)?;
    let sibling = |ext: &str| {
        let mut s = path.as_os_str().to_owned();
        s.push(ext);
        std::path::PathBuf::from(s)
    };
    std::fs::write(
        sibling(".manifest.json"),
        serde_json::to_string_pretty(manifest)? + "\n",
    )?;
    std::fs::write(sibling(".config.toml"), &manifest.resolved_config)?;
    Ok(())
}
