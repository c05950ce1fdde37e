use mtoc_core::channel::{self, ChannelConfig};
use mtoc_core::data::ImageSet;
use mtoc_core::model::{assemble, decoder_spec, ConfigId, MtocSystem, Receiver, ReceiverSpec};
use mtoc_core::nn::{Activation, AdamConfig, LayerKind, Network, NetworkSpec};
use mtoc_core::rng;
use mtoc_core::tasks::{DatasetName, TaskSpec};
use mtoc_core::train::{
    evaluate, forward_backward, train, train_stoc_baseline, EvalConfig, Mode, TrainConfig,
};
use mtoc_core::{Error, Tensor};
use rand::Rng as _;

/// Images whose pixels encode the class, plus mild noise.
fn synthetic(n: usize, side: usize, seed: u64) -> ImageSet {
    let mut r = rng::from_seed(seed);
    let per = side * side;
    let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..10)).collect();
    let mut pixels = Vec::with_capacity(n * per);
    for &l in &labels {
        for j in 0..per {
            let base = if j % 10 == l as usize { 200 } else { 30 };
            pixels.push(base + r.random_range(0..40u8));
        }
    }
    ImageSet::new(DatasetName::Mnist, [side, side, 1], pixels, labels).unwrap()
}

fn small_system(weights: &[f64], seed: u64) -> MtocSystem {
    let n_c = 6;
    let spec = NetworkSpec::new(
        vec![4, 4, 1],
        vec![
            LayerKind::Flatten,
            LayerKind::dense(16, Activation::ReLU),
            LayerKind::dense(n_c, Activation::Linear),
        ],
    )
    .unwrap();
    let encoder = Network::new(spec, &mut rng::from_seed(seed));
    let receivers = weights
        .iter()
        .enumerate()
        .map(|(i, &weight)| Receiver {
            channel: ChannelConfig::rayleigh(3.0),
            decoder: Network::new(
                decoder_spec(n_c).unwrap(),
                &mut rng::from_seed(seed + 1 + i as u64),
            ),
            task: TaskSpec::window(DatasetName::Mnist, i + 1).unwrap(),
            weight,
        })
        .collect();
    MtocSystem::from_parts(encoder, receivers).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        adam: AdamConfig {
            lr: 5e-3,
            ..AdamConfig::default()
        },
        seed: 42,
        mode: Mode::Mtoc,
    }
}

#[test]
fn zero_weight_decoder_never_moves() {
    let data = synthetic(200, 4, 1);
    let mut system = small_system(&[1.0, 0.0], 3);
    let before = system.receivers[1].decoder.clone();
    train(&mut system, &data, &cfg(3)).unwrap();
    assert_eq!(system.receivers[1].decoder, before);
    assert_ne!(
        system.receivers[0].decoder,
        small_system(&[1.0, 0.0], 3).receivers[0].decoder
    );
}

#[test]
fn zero_weight_task_adds_nothing_to_encoder_gradient() {
    let mut r = rng::from_seed(9);
    let x = Tensor::from_fn(vec![8, 4, 4, 1], |_| r.random());
    let labels: Vec<Vec<usize>> = (0..2)
        .map(|_| (0..8).map(|_| r.random_range(0..2)).collect())
        .collect();
    let refs: Vec<&[usize]> = labels.iter().map(Vec::as_slice).collect();
    let mut both = small_system(&[1.0, 0.0], 5);
    let reals: Vec<_> = (0..2)
        .map(|_| channel::realize(&ChannelConfig::rayleigh(3.0), 8, 6, &mut r).unwrap())
        .collect();
    forward_backward(
        &mut both,
        &x,
        &refs,
        &[1.0, 0.0],
        &reals,
        &mut rng::from_seed(0),
    )
    .unwrap();

    let mut single = both.clone();
    single.receivers.truncate(1);
    forward_backward(
        &mut single,
        &x,
        &refs[..1],
        &[1.0],
        &reals[..1],
        &mut rng::from_seed(0),
    )
    .unwrap();
    assert!(both.encoder.grads().eq(single.encoder.grads()));
    assert!(both.receivers[1]
        .decoder
        .grads()
        .all(|g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn joint_gradient_is_linear_in_the_weights() {
    let mut r = rng::from_seed(10);
    let x = Tensor::from_fn(vec![8, 4, 4, 1], |_| r.random());
    let labels: Vec<Vec<usize>> = (0..2)
        .map(|_| (0..8).map(|_| r.random_range(0..2)).collect())
        .collect();
    let refs: Vec<&[usize]> = labels.iter().map(Vec::as_slice).collect();
    let reals: Vec<_> = (0..2)
        .map(|_| channel::realize(&ChannelConfig::rayleigh(3.0), 8, 6, &mut r).unwrap())
        .collect();
    let grads = |w: [f64; 2]| -> Vec<f64> {
        let mut s = small_system(&[0.5, 0.5], 6);
        forward_backward(&mut s, &x, &refs, &w, &reals, &mut rng::from_seed(0)).unwrap();
        s.encoder.grads().flat_map(|g| g.data().to_vec()).collect()
    };
    let (joint, g1, g2) = (grads([0.5, 0.5]), grads([1.0, 0.0]), grads([0.0, 1.0]));
    let scale = g1.iter().chain(&g2).map(|v| v.abs()).fold(0.0, f64::max);
    for ((j, a), b) in joint.iter().zip(&g1).zip(&g2) {
        assert!(
            (j - 0.5 * (a + b)).abs() <= 1e-12 * scale,
            "{j} vs {}",
            0.5 * (a + b)
        );
    }
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let data = synthetic(150, 4, 2);
    let mut a = small_system(&[0.5, 0.5], 7);
    let mut b = small_system(&[0.5, 0.5], 7);
    let ra = train(&mut a, &data, &cfg(2)).unwrap();
    let rb = train(&mut b, &data, &cfg(2)).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&ra.loss_trajectory), bits(&rb.loss_trajectory));
}

#[test]
fn training_reduces_the_loss() {
    let data = synthetic(400, 4, 3);
    let mut s = small_system(&[0.5, 0.5], 8);
    let report = train(&mut s, &data, &cfg(8)).unwrap();
    assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    assert_eq!(report.steps as usize, report.loss_trajectory.len());
}

#[test]
fn mtoc_with_one_hot_weights_matches_stoc_baseline() {
    let mnist_like = {
        let small = synthetic(48, 28, 4);
        ImageSet::new(
            DatasetName::Mnist,
            [28, 28, 1],
            small.pixels().to_vec(),
            small.labels().to_vec(),
        )
        .unwrap()
    };
    let tasks = [
        TaskSpec::window(DatasetName::Mnist, 1).unwrap(),
        TaskSpec::window(DatasetName::Mnist, 2).unwrap(),
    ];
    let specs: Vec<ReceiverSpec> = tasks
        .iter()
        .zip([1.0, 0.0])
        .map(|(&task, weight)| ReceiverSpec {
            channel: ChannelConfig::rayleigh(3.0),
            task,
            weight,
        })
        .collect();
    let tc = cfg(2);
    let mut mtoc = assemble(ConfigId::MnistFnn, 8, &specs, tc.seed).unwrap();
    let mr = train(&mut mtoc, &mnist_like, &tc).unwrap();
    let (stoc, sr) = train_stoc_baseline(
        ConfigId::MnistFnn,
        8,
        tasks[0],
        specs[0].channel,
        &mnist_like,
        &tc,
    )
    .unwrap();
    assert_eq!(mtoc.encoder, stoc.encoder);
    assert_eq!(mtoc.receivers[0].decoder, stoc.receivers[0].decoder);
    assert_eq!(mr.loss_trajectory, sr.loss_trajectory);
}

#[test]
fn divergence_is_reported_with_its_position() {
    let data = synthetic(64, 4, 5);
    let mut s = small_system(&[1.0], 9);
    let mut tc = cfg(1);
    tc.adam.lr = f64::INFINITY;
    match train(&mut s, &data, &tc) {
        Err(Error::Divergence { epoch, batch, loss }) => {
            assert_eq!(epoch, 0);
            assert_eq!(batch, 1);
            assert!(!loss.is_finite());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn mismatched_sample_shape_is_a_config_error() {
    let data = synthetic(10, 5, 6);
    let mut s = small_system(&[1.0], 1);
    assert!(matches!(
        train(&mut s, &data, &cfg(1)),
        Err(Error::Config(_))
    ));
}

/// Two pixels carry the label; a hand-set encoder and decoder decide
/// perfectly over a noiseless unit-gain channel.
#[test]
fn perfect_classifier_scores_one() {
    let task = TaskSpec::window(DatasetName::Mnist, 1).unwrap();
    let labels: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
    let pixels: Vec<u8> = labels
        .iter()
        .flat_map(|&l| {
            if task.positive_set().contains(l as usize) {
                [255, 0]
            } else {
                [0, 255]
            }
        })
        .collect();
    let data = ImageSet::new(DatasetName::Mnist, [1, 2, 1], pixels, labels).unwrap();
    let enc_spec = NetworkSpec::new(
        vec![1, 2, 1],
        vec![LayerKind::Flatten, LayerKind::dense(2, Activation::Linear)],
    )
    .unwrap();
    let eye = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
    let encoder =
        Network::from_params(enc_spec, vec![eye.clone(), Tensor::zeros(vec![2])]).unwrap();
    let decoder = Network::from_params(
        decoder_spec(2).unwrap(),
        vec![
            eye,
            Tensor::zeros(vec![2]),
            Tensor::from_rows(&[&[1.0], &[-1.0]]).unwrap(),
            Tensor::zeros(vec![1]),
            Tensor::from_rows(&[&[0.0, 10.0]]).unwrap(),
            Tensor::zeros(vec![2]),
        ],
    )
    .unwrap();
    let system = MtocSystem::from_parts(
        encoder,
        vec![Receiver {
            channel: ChannelConfig::identity(),
            decoder,
            task,
            weight: 1.0,
        }],
    )
    .unwrap();
    let before = system.clone();
    let report = evaluate(
        &system,
        &data,
        &EvalConfig {
            trials: 3,
            chunk: 7,
            ..EvalConfig::default()
        },
    )
    .unwrap();
    assert_eq!(report.accuracy, vec![1.0]);
    assert_eq!(report.total, 150);
    assert_eq!(report.channel_uses_per_image, 2);
    assert_eq!(system, before);
}

#[test]
fn scaling_weights_scales_the_loss_and_keeps_first_step_signs() {
    let data = synthetic(16, 4, 7);
    let one_step = |w: [f64; 2]| {
        let mut s = small_system(&w, 11);
        let tc = TrainConfig {
            epochs: 1,
            batch_size: 16,
            ..cfg(1)
        };
        let report = train(&mut s, &data, &tc).unwrap();
        let start = small_system(&w, 11);
        let deltas: Vec<f64> = s
            .encoder
            .params()
            .zip(start.encoder.params())
            .flat_map(|(a, b)| {
                a.data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| x - y)
                    .collect::<Vec<_>>()
            })
            .collect();
        (report.loss_trajectory[0], deltas)
    };
    let (l1, d1) = one_step([0.4, 0.2]);
    let (l2, d2) = one_step([0.8, 0.4]);
    assert!((l2 - 2.0 * l1).abs() < 1e-12);
    for (a, b) in d1.iter().zip(&d2) {
        assert_eq!(a.signum(), b.signum());
    }
}

#[test]
fn eval_trials_average_and_stay_in_range() {
    let data = synthetic(100, 4, 8);
    let s = small_system(&[0.5, 0.5], 12);
    for trials in [1, 4] {
        let r = evaluate(
            &s,
            &data,
            &EvalConfig {
                trials,
                ..EvalConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.total, 100 * trials as u64);
        for (&a, &c) in r.accuracy.iter().zip(&r.correct) {
            assert_eq!(a, c as f64 / r.total as f64);
            assert!((0.0..=1.0).contains(&a));
        }
    }
    let stoc = evaluate(
        &s,
        &data,
        &EvalConfig {
            mode: Mode::Stoc(0),
            ..EvalConfig::default()
        },
    )
    .unwrap();
    assert_eq!(stoc.channel_uses_per_image, 12);
}
