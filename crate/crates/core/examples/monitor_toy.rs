//! Train a Sample-BRT value network on toy rollouts and use it as a runtime
//! monitor on fresh trajectories.

use latent_reach::dynamics::{generate_toy_dataset, ToyDatasetConfig, TwoAttractorSystem};
use latent_reach::metrics::confusion_and_f1;
use latent_reach::monitor::{first_token_index_stat, monitor_dataset};
use latent_reach::train::{train, TrainConfig, TrainMode};
use latent_reach::trajectory::{trajectory_is_unsafe, SafetyLabelConfig};

fn main() -> latent_reach::Result<()> {
    let system = TwoAttractorSystem::default();
    let toy = |count, seed| {
        generate_toy_dataset(&system, &ToyDatasetConfig { count, horizon: 20, seed, ..Default::default() })
    };
    let train_set = toy(1500, 1)?;
    let test_set = toy(300, 2)?;

    let mut cfg = TrainConfig::new(TrainMode::Sample);
    cfg.hidden = (64, 32);
    cfg.epochs = 5;
    cfg.learning_rate = 1e-3;
    let outcome = train(&train_set, &cfg)?;
    println!(
        "trained in {:.1}s, val mse {:?}",
        outcome.report.seconds, outcome.report.val_mse
    );

    let reports = monitor_dataset(&outcome.network, &test_set, 0.0)?;
    let labels = SafetyLabelConfig::default();
    let truth: Vec<bool> = test_set.trajectories().iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
    let flagged: Vec<bool> = reports.iter().map(|r| r.flagged).collect();
    let confusion = confusion_and_f1(&flagged, &truth)?;
    println!("{}", serde_json::to_string_pretty(&confusion).unwrap());
    println!("first token index: {:?}", first_token_index_stat(&reports, &truth)?);
    Ok(())
}
