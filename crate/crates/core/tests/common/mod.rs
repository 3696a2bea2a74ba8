//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use latent_reach::dynamics::{generate_toy_dataset, ToyDatasetConfig, TwoAttractorSystem};
use latent_reach::trajectory::TrajectoryDataset;
use latent_reach::valuenet::{BatchItem, NetworkDims, ValueNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Gradient components below this magnitude are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

/// Random double-precision network with every parameter (including layer-norm
/// gains and biases) perturbed away from its initial value, so no gradient
/// component is structurally zero.
pub fn random_net(dims: NetworkDims, seed: u64) -> ValueNetwork<f64> {
    let mut net = ValueNetwork::<f64>::new(dims, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for t in net.params_mut().tensors_mut() {
        for x in t.iter_mut() {
            *x += rng.random_range(-0.5..0.5);
        }
    }
    net
}

pub struct RandomBatch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RandomBatch {
    pub fn new(dim: usize, len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            inputs: (0..len)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            targets: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            weights: (0..len).map(|_| if rng.random_bool(0.5) { 2.0 } else { 1.0 }).collect(),
        }
    }

    pub fn items(&self) -> Vec<BatchItem<'_, f64>> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .map(|((x, &target), &weight)| BatchItem { input: x, target, weight })
            .collect()
    }
}

/// Weighted MSE computed from `forward` alone: `sum w (f(x)-y)^2 / sum w`.
pub fn reference_loss(net: &ValueNetwork<f64>, batch: &RandomBatch) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, y), w) in batch.inputs.iter().zip(&batch.targets).zip(&batch.weights) {
        let e = net.forward(x).unwrap() - y;
        num += w * e * e;
        den += w;
    }
    num / den
}

/// Largest relative deviation between the analytic gradient and central
/// differences of [`reference_loss`], over every parameter.
pub fn max_gradient_error(net: &ValueNetwork<f64>, batch: &RandomBatch) -> f64 {
    let (_, grads) = net.loss_and_grads(&batch.items()).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut k = 0;
    for ti in 0..analytic_tensor_count(net) {
        let len = net.params().tensors()[ti].len();
        for j in 0..len {
            let orig = probe.params().tensors()[ti][j];
            probe.params_mut().tensors_mut()[ti][j] = orig + FD_STEP;
            let up = reference_loss(&probe, batch);
            probe.params_mut().tensors_mut()[ti][j] = orig - FD_STEP;
            let down = reference_loss(&probe, batch);
            probe.params_mut().tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max(rel);
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

fn analytic_tensor_count(net: &ValueNetwork<f64>) -> usize {
    net.params().tensors().len()
}

pub fn toy_dataset(count: usize, horizon: usize, seed: u64) -> TrajectoryDataset {
    let cfg = ToyDatasetConfig {
        count,
        horizon,
        seed,
        ..Default::default()
    };
    generate_toy_dataset(&TwoAttractorSystem::default(), &cfg).unwrap()
}
