//! Cross-module properties.

mod common;

use latent_reach::dynamics::{generate_toy_dataset, rollout, ToyDatasetConfig, TwoAttractorSystem};
use latent_reach::monitor::monitor_trajectory;
use latent_reach::oracle::{grid_brt, AxisBounds, BruteForceValue};
use latent_reach::steer::{steered_rollout, SteeringConfig};
use latent_reach::target::LatentTarget;
use latent_reach::train::{build_training_set, train, train_from, TrainConfig, TrainMode, TrainingExample};
use latent_reach::trajectory::{LatentPoint, Trajectory, TrajectoryDataset};
use latent_reach::value::ValueFunction;
use latent_reach::valuenet::{BatchItem, NetworkDims, ValueNetwork};
use proptest::prelude::*;

fn small_config(mode: TrainMode) -> TrainConfig {
    let mut cfg = TrainConfig::new(mode);
    cfg.hidden = (16, 8);
    cfg.epochs = 3;
    cfg.learning_rate = 1e-3;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_value_flags_no_later_than_failure(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let system = TwoAttractorSystem::default();
        let target = system.failure_target();
        let horizon = 25;
        let states = rollout(&system, &LatentPoint::new(vec![x, y]).unwrap(), horizon, None).unwrap();
        let ell: Vec<f64> = states.iter().map(|s| target.eval(s).unwrap()).collect();
        let traj = Trajectory::new(states, ell.clone()).unwrap();
        // Time-varying oracle: the value at step t looks ahead T - t steps.
        let values: Vec<f64> = traj
            .states()
            .iter()
            .enumerate()
            .map(|(t, s)| {
                BruteForceValue { system: &system, target: &target, horizon: horizon - t }.value(s)
            })
            .collect();
        let report = latent_reach::monitor::MonitorReport::from_values(values, 0.0);
        if let Some(fail) = ell.iter().position(|&l| l <= 0.0) {
            prop_assert!(report.first_flag_index.unwrap() <= fail);
        }
        // The stationary long-horizon oracle is at least as early.
        let stationary = BruteForceValue { system: &system, target: &target, horizon };
        let early = monitor_trajectory(&stationary, &traj, 0.0).unwrap();
        if let (Some(a), Some(b)) = (early.first_flag_index, report.first_flag_index) {
            prop_assert!(a <= b);
        }
    }
}

#[test]
fn sample_targets_are_constant_per_trajectory() {
    let ds = common::toy_dataset(20, 8, 1);
    let set = build_training_set(&ds, &small_config(TrainMode::Sample)).unwrap();
    for (chunk, traj) in set.chunks(9).zip(ds.trajectories()) {
        assert!(chunk.iter().all(|e| e.target == traj.terminal_ell() as f32));
    }
}

#[test]
fn rl_with_unit_discount_matches_sample_when_minimum_is_terminal() {
    let header = common::toy_dataset(1, 2, 0).header().clone();
    let states: Vec<LatentPoint> = (0..4).map(|t| LatentPoint::new(vec![t as f64, 0.0]).unwrap()).collect();
    let traj = Trajectory::new(states, vec![0.9, 0.5, 0.1, -0.3]).unwrap();
    let ds = TrajectoryDataset::new(header, vec![traj]).unwrap();
    let mut rl = small_config(TrainMode::Rl);
    rl.gamma = 1.0;
    let a = build_training_set(&ds, &rl).unwrap();
    let b = build_training_set(&ds, &small_config(TrainMode::Sample)).unwrap();
    assert_eq!(a, b);
}

fn item(e: &TrainingExample) -> BatchItem<'_, f32> {
    BatchItem { input: e.input.as_slice(), target: e.target, weight: e.weight }
}

#[test]
fn doubled_unsafe_weight_equals_duplicated_examples() {
    let ds = common::toy_dataset(12, 5, 4);
    let mut cfg = small_config(TrainMode::Rl);
    cfg.unsafe_weight = 2.0;
    let weighted = build_training_set(&ds, &cfg).unwrap();
    cfg.unsafe_weight = 1.0;
    let plain = build_training_set(&ds, &cfg).unwrap();
    let unsafe_rows: Vec<_> = weighted.iter().filter(|e| e.weight == 2.0).collect();
    assert!(!unsafe_rows.is_empty());

    let net = ValueNetwork::<f32>::new(NetworkDims::new(2, 8, 4).unwrap(), 3);
    let a: Vec<_> = weighted.iter().map(item).collect();
    let mut b: Vec<_> = plain.iter().map(item).collect();
    for (w, p) in weighted.iter().zip(&plain) {
        if w.weight == 2.0 {
            b.push(item(p));
        }
    }
    let (la, ga) = net.loss_and_grads(&a).unwrap();
    let (lb, gb) = net.loss_and_grads(&b).unwrap();
    assert!((la - lb).abs() <= 1e-6 * la.abs().max(1.0));
    for (x, y) in ga.iter().zip(gb.iter()) {
        assert!((x - y).abs() <= 1e-5 * x.abs().max(1e-3), "{x} vs {y}");
    }
}

#[test]
fn training_is_reproducible_in_process() {
    let ds = common::toy_dataset(60, 10, 5);
    let cfg = small_config(TrainMode::Rl);
    let a = train(&ds, &cfg).unwrap();
    let b = train(&ds, &cfg).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.report.epoch_losses, b.report.epoch_losses);
}

#[test]
fn warm_start_keeps_the_sample_fit() {
    let ds = common::toy_dataset(200, 12, 6);
    let mut sample = small_config(TrainMode::Sample);
    sample.epochs = 4;
    let warm = train(&ds, &sample).unwrap().network;
    let mut rl = small_config(TrainMode::Rl);
    rl.epochs = 1;
    rl.learning_rate = 3e-5;
    let set = build_training_set(&ds, &rl).unwrap();
    let items: Vec<_> = set.iter().filter(|e| e.terminal).map(item).collect();
    let before = warm.weighted_mse(&items).unwrap();
    let warmed = train_from(&ds, &rl, Some(warm)).unwrap().network.weighted_mse(&items).unwrap();
    let cold = train(&ds, &rl).unwrap().network.weighted_mse(&items).unwrap();
    eprintln!("sample {before:.5} warm rl {warmed:.5} cold rl {cold:.5}");
    assert!(warmed <= 2.0 * before, "{warmed} vs {before}");
    assert!(warmed < cold, "{warmed} vs {cold}");
}

#[test]
fn learned_net_above_threshold_never_steers() {
    let ds = common::toy_dataset(300, 12, 7);
    let mut cfg = small_config(TrainMode::Sample);
    cfg.epochs = 5;
    let net = train(&ds, &cfg).unwrap().network;
    let system = TwoAttractorSystem::default();
    let steer = SteeringConfig { alpha: -10.0, ..Default::default() };
    for traj in ds.trajectories().iter().take(50) {
        let z0 = &traj.states()[0];
        let plain = rollout(&system, z0, 12, None).unwrap();
        if plain.iter().all(|z| net.value(z) > steer.alpha) {
            let steered = steered_rollout(&system, &net, z0, 12, &steer).unwrap();
            assert_eq!(steered.states, plain);
        }
    }
}

#[test]
fn sixteen_dimensional_toy_pipeline() {
    let system = TwoAttractorSystem::with_dim(16).unwrap();
    let ds = generate_toy_dataset(&system, &ToyDatasetConfig { count: 200, horizon: 15, seed: 8, ..Default::default() })
        .unwrap();
    assert_eq!(ds.dim(), 16);
    let net = train(&ds, &small_config(TrainMode::Rl)).unwrap().network;
    let cfg = SteeringConfig { alpha: 0.1, radius: 0.5, ..Default::default() };
    let z0 = ds.trajectories()[0].states()[0].clone();
    let run = steered_rollout(&system, &net, &z0, 15, &cfg).unwrap();
    assert!(run.decisions.iter().all(|d| d.control.norm() <= 0.5 && d.value_after >= d.value));
}

#[test]
fn grid_oracle_rejects_high_dimensional_systems() {
    let system = TwoAttractorSystem::with_dim(4).unwrap();
    let bounds = vec![AxisBounds { lo: -1.0, hi: 1.0 }; 4];
    assert!(grid_brt(&system, &system.failure_target(), &bounds, &[3; 4], 5).is_err());
}
