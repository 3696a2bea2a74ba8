//! Offline value learning from recorded trajectories.
//!
//! Two target constructions share one regression loop:
//!
//! * **sample** mode regresses every state onto the terminal label `l(z_T)`;
//! * **rl** mode regresses onto the discounted-min Bellman targets, computed
//!   exactly by a backward pass over each recorded trajectory, with a linear
//!   curriculum on the non-terminal terms.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{
    discounted_min_targets, ensure_dim, terminal_targets, trajectory_is_unsafe, SafetyLabelConfig,
    Trajectory, TrajectoryDataset,
};
use crate::valuenet::{
    adam_step, AdamConfig, BatchItem, NetworkDims, OptimizerState, Parameters, ValueNetwork,
    DEFAULT_HIDDEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Sample,
    Rl,
}

impl TrainMode {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            TrainMode::Sample => 1e-4,
            TrainMode::Rl => 3e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub unsafe_weight: f64,
    /// Epochs over which the non-terminal loss weight ramps to one (rl only).
    pub curriculum_epochs: usize,
    pub seed: u64,
    pub hidden: (usize, usize),
    pub weight_decay: f64,
    /// Fraction of trajectories, taken from the end of the dataset, held out.
    pub val_fraction: f64,
    pub unsafe_threshold: f64,
    pub warm_start: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(mode: TrainMode) -> Self {
        Self {
            mode,
            gamma: 0.99,
            learning_rate: mode.default_learning_rate(),
            batch_size: 8,
            epochs: 20,
            unsafe_weight: 2.0,
            curriculum_epochs: 10,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            weight_decay: 1e-5,
            val_fraction: 0.1,
            unsafe_threshold: 0.0,
            warm_start: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidGamma(self.gamma));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.unsafe_weight >= 1.0 && self.unsafe_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "unsafe weight must be >= 1, got {}",
                self.unsafe_weight
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// One state-level regression example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<f32>,
    pub target: f32,
    pub weight: f32,
    /// `true` for the last state of its trajectory.
    pub terminal: bool,
}

fn trajectory_targets(traj: &Trajectory, cfg: &TrainConfig) -> Result<Vec<f64>> {
    match cfg.mode {
        TrainMode::Sample => terminal_targets(traj.ell()),
        TrainMode::Rl => discounted_min_targets(traj.ell(), cfg.gamma),
    }
}

fn examples_from(trajs: &[Trajectory], dim: usize, cfg: &TrainConfig) -> Result<Vec<TrainingExample>> {
    let labels = SafetyLabelConfig {
        unsafe_threshold: cfg.unsafe_threshold,
    };
    let mut out = Vec::with_capacity(trajs.iter().map(|t| t.len()).sum());
    for traj in trajs {
        ensure_dim(dim, traj.dim())?;
        let weight = if trajectory_is_unsafe(traj, &labels) {
            cfg.unsafe_weight
        } else {
            1.0
        };
        let targets = trajectory_targets(traj, cfg)?;
        let last = traj.len() - 1;
        for (t, (state, target)) in traj.states().iter().zip(targets).enumerate() {
            out.push(TrainingExample {
                input: state.iter().map(|&c| c as f32).collect(),
                target: target as f32,
                weight: weight as f32,
                terminal: t == last,
            });
        }
    }
    Ok(out)
}

/// One example per state per trajectory. Unsafe trajectories (terminal label
/// at or below the threshold) get `unsafe_weight`; the curriculum multiplier
/// is applied later, per epoch.
pub fn build_training_set(dataset: &TrajectoryDataset, cfg: &TrainConfig) -> Result<Vec<TrainingExample>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    examples_from(dataset.trajectories(), dataset.dim(), cfg)
}

/// Linear ramp `min(1, (epoch + 1) / curriculum_epochs)`; 1 when disabled.
pub fn curriculum_weight(epoch: usize, curriculum_epochs: usize) -> f64 {
    if curriculum_epochs == 0 {
        1.0
    } else {
        ((epoch + 1) as f64 / curriculum_epochs as f64).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub train_trajectories: usize,
    pub val_trajectories: usize,
    pub steps: u64,
    pub seconds: f64,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: ValueNetwork<f32>,
    pub optimizer: OptimizerState<f32>,
    pub report: TrainReport,
}

fn as_batch(examples: &[TrainingExample]) -> Vec<BatchItem<'_, f32>> {
    examples
        .iter()
        .map(|e| BatchItem {
            input: &e.input,
            target: e.target,
            weight: e.weight,
        })
        .collect()
}

/// Trains a fresh network, or continues from `cfg.warm_start` when set.
pub fn train(dataset: &TrajectoryDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let init = match &cfg.warm_start {
        Some(path) => Some(crate::store::load_checkpoint(path)?.0),
        None => None,
    };
    train_from(dataset, cfg, init)
}

/// Trains starting from `init` (parameters only; the optimizer starts fresh).
pub fn train_from(
    dataset: &TrajectoryDataset,
    cfg: &TrainConfig,
    init: Option<ValueNetwork<f32>>,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_trajs, val_trajs) = dataset.split_tail(cfg.val_fraction);
    if train_trajs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train_set = examples_from(train_trajs, dataset.dim(), cfg)?;
    let val_set = examples_from(val_trajs, dataset.dim(), cfg)?;

    let dims = NetworkDims::new(dataset.dim(), cfg.hidden.0, cfg.hidden.1)?;
    let mut network = match init {
        Some(net) => {
            if net.dims() != dims {
                return Err(Error::InvalidConfig(format!(
                    "warm-start network has dims {:?}, expected {:?}",
                    net.dims(),
                    dims
                )));
            }
            net
        }
        None => ValueNetwork::new(dims, cfg.seed),
    };
    let mut optimizer = OptimizerState::new(&dims, cfg.adam());
    let mut grads = Parameters::zeros(&dims);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch: Vec<BatchItem<'_, f32>> = Vec::with_capacity(cfg.batch_size);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let ramp = match cfg.mode {
            TrainMode::Rl => curriculum_weight(epoch, cfg.curriculum_epochs) as f32,
            TrainMode::Sample => 1.0,
        };
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| {
                let e = &train_set[i];
                BatchItem {
                    input: &e.input,
                    target: e.target,
                    weight: if e.terminal { e.weight } else { e.weight * ramp },
                }
            }));
            let loss = network
                .loss_and_grads_into(&batch, &mut grads)
                .map_err(|e| match e {
                    Error::NumericalOverflow => Error::Diverged {
                        step: optimizer.step as usize,
                    },
                    other => other,
                })?;
            adam_step(network.params_mut(), &grads, &mut optimizer);
            loss_sum += loss as f64;
            batches += 1;
        }
        if !network.params().all_finite() {
            return Err(Error::Diverged {
                step: optimizer.step as usize,
            });
        }
        epoch_losses.push(loss_sum / batches.max(1) as f64);
    }

    let train_mse = network.weighted_mse(&as_batch(&train_set))?;
    let val_mse = if val_set.is_empty() {
        None
    } else {
        Some(network.weighted_mse(&as_batch(&val_set))?)
    };
    let report = TrainReport {
        epoch_losses,
        train_mse,
        val_mse,
        train_trajectories: train_trajs.len(),
        val_trajectories: val_trajs.len(),
        steps: optimizer.step,
        seconds: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    Ok(TrainOutcome {
        network,
        optimizer,
        report,
    })
}
