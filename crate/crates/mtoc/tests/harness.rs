use mtoc::config::{ExperimentConfig, ModeKey, RunSpec};
use mtoc::harness::{self, Point, PointMode, CSV_HEADER, FAILED};
use mtoc_core::data::{Dataset, ImageSet};
use mtoc_core::tasks::DatasetName;

/// Label-dependent pixels so that tiny runs learn something.
fn synthetic(train: usize, test: usize) -> Dataset {
    let set = |n: usize, offset: usize| {
        let labels: Vec<u8> = (0..n).map(|i| ((i + offset) * 7 % 10) as u8).collect();
        let pixels = labels
            .iter()
            .enumerate()
            .flat_map(|(i, &l)| {
                (0..784).map(move |p| ((p * 31 + i * 17) % 64 + 19 * l as usize) as u8)
            })
            .collect();
        ImageSet::new(DatasetName::Mnist, [28, 28, 1], pixels, labels).unwrap()
    };
    Dataset::new(DatasetName::Mnist, set(train, 0), set(test, 3)).unwrap()
}

fn base() -> RunSpec {
    ExperimentConfig {
        epochs: Some(1),
        batch_size: Some(16),
        trials: Some(2),
        seed: Some(5),
        ..Default::default()
    }
    .resolve()
    .unwrap()
}

#[test]
fn header_is_exact() {
    let csv = harness::csv_string(&[], true);
    assert_eq!(
        csv,
        "dataset,mode,n,n_c,snr_db_list,weights,task_id,accuracy,loss,channel_uses,seed,epochs,wall_s\n"
    );
    assert_eq!(CSV_HEADER.len(), 13);
}

#[test]
fn two_tasks_give_two_rows_per_point_and_seeds_follow_the_row_index() {
    let data = synthetic(64, 40);
    let points = harness::sweep_snr(&base(), &[-3.0, 9.0]).unwrap();
    let result = harness::run(&points, &data, &mut |_, _| {});
    assert_eq!(result.rows.len(), 4);
    let seeds: Vec<u64> = result.rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![5, 5, 4, 4]);
    for r in &result.rows {
        let acc = r.accuracy().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(r.channel_uses, 20);
    }
    assert_eq!(result.rows[2].snr_db, vec![9.0, 9.0]);
}

#[test]
fn csv_is_byte_identical_across_reruns_without_timing() {
    let data = synthetic(64, 40);
    let points = harness::sweep_nc(&base(), &[4, 8]).unwrap();
    let a = harness::run(&points, &data, &mut |_, _| {});
    let b = harness::run(&points, &data, &mut |_, _| {});
    assert_eq!(
        harness::csv_string(&a.rows, false),
        harness::csv_string(&b.rows, false)
    );
    assert_eq!(a.trajectories, b.trajectories);
    let uses: Vec<usize> = a.rows.iter().map(|r| r.channel_uses).collect();
    assert_eq!(uses, vec![4, 4, 8, 8]);
}

#[test]
fn singleton_sweep_matches_a_direct_run() {
    let data = synthetic(64, 40);
    let b = base();
    let points = harness::sweep_snr(&b, &[3.0]).unwrap();
    let swept = harness::run(&points, &data, &mut |_, _| {});
    let direct = harness::train_point(&b, PointMode::Mtoc, &data).unwrap();
    let acc: Vec<f64> = swept.rows.iter().map(|r| r.accuracy().unwrap()).collect();
    assert_eq!(acc, direct.results.iter().map(|r| r.0).collect::<Vec<_>>());
}

#[test]
fn failed_points_are_marked_and_later_points_still_run() {
    let data = synthetic(32, 20);
    let b = base();
    let mut broken = b.clone();
    broken.weights = vec![1.5, 0.0];
    let points = vec![
        Point {
            index: 0,
            spec: broken,
            mode: PointMode::Mtoc,
            average: false,
        },
        harness::single(&b).remove(0),
    ];
    let result = harness::run(&points, &data, &mut |_, _| {});
    assert_eq!(result.rows.len(), 4);
    assert!(result.rows[0].outcome.is_err() && result.rows[1].outcome.is_err());
    assert!(result.rows[2].outcome.is_ok() && result.rows[3].outcome.is_ok());
    let csv = harness::csv_string(&result.rows, false);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .contains(&format!(",{FAILED},{FAILED},")));
    let manifest =
        harness::RunManifest::new("test", String::new(), Vec::new(), &points, &result, false);
    assert_eq!(manifest.failed_rows.len(), 2);
    assert!(!manifest.window_repetition);
}

#[test]
fn stoc_rows_account_for_every_receiver() {
    let data = synthetic(32, 20);
    let mut b = base();
    b.mode = ModeKey::Stoc;
    let result = harness::run(&harness::single(&b), &data, &mut |_, _| {});
    assert_eq!(result.rows.len(), 2);
    assert_eq!(result.trajectories[0].len(), 2);
    for r in &result.rows {
        assert_eq!((r.mode.as_str(), r.channel_uses), ("stoc", 40));
    }
    assert_eq!(result.rows[1].weights, vec![0.0, 1.0]);
}

#[test]
fn receiver_sweep_layout() {
    let points = harness::sweep_receivers(&base(), &[2, 3]).unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!(points[0].spec.weights, vec![0.5, 0.5]);
    assert_eq!(points[1].mode, PointMode::StocFirst);
    assert_eq!(points[1].spec.train.seed, points[0].spec.train.seed);
    assert_eq!(
        points[2].spec.tasks[2].positive_set().indices(),
        vec![3, 4, 5, 6, 7]
    );
    assert_eq!(
        points[0].spec.tasks[0].positive_set().indices(),
        vec![1, 2, 3, 4, 5]
    );
    assert_eq!(
        points[0].spec.tasks[1].positive_set().indices(),
        vec![2, 3, 4, 5, 6]
    );

    let data = synthetic(32, 20);
    let result = harness::run(&points[..2], &data, &mut |_, _| {});
    let ids: Vec<&str> = result.rows.iter().map(|r| r.task_id.as_str()).collect();
    assert_eq!(
        ids,
        ["window:1", "window:2", "mean", "window:1", "window:2", "mean"]
    );
    assert_eq!(result.rows[3].channel_uses, 2 * result.rows[0].channel_uses);
}

#[test]
fn sweep_preconditions() {
    let b = base();
    assert!(harness::sweep_snr(&b, &[]).is_err());
    assert!(harness::sweep_nc(&b, &[1]).is_err());
    assert!(harness::sweep_weights(&b, &[1.2]).is_err());
    assert!(harness::sweep_receivers(&b, &[1]).is_err());
    let mut three = b.clone();
    three.tasks.push(three.tasks[0]);
    three.weights.push(0.0);
    three.snr_db.push(3.0);
    assert!(harness::sweep_asym(&three, 0, &[0.0]).is_err());
    let asym = harness::sweep_asym(&b, 1, &[-3.0, 9.0]).unwrap();
    assert_eq!(asym[1].spec.snr_db, vec![3.0, 9.0]);
    let w = harness::sweep_weights(&b, &[0.1]).unwrap();
    assert_eq!(w[0].spec.weights, vec![0.1, 0.9]);
}

#[test]
fn emit_writes_csv_manifest_and_config() {
    let data = synthetic(32, 20);
    let points = harness::single(&base());
    let result = harness::run(&points, &data, &mut |_, _| {});
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/out.csv");
    let cfg = ExperimentConfig::default().to_toml();
    let manifest =
        harness::RunManifest::new("train", cfg.clone(), Vec::new(), &points, &result, false);
    harness::emit(&path, &result.rows, &manifest, false).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        harness::csv_string(&result.rows, false)
    );
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("sub/out.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["rows"], 2);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("sub/out.csv.config.toml")).unwrap(),
        cfg
    );
}
