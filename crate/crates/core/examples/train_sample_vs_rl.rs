//! Sample-BRT versus RL-BRT on the toy system, both scored against the exact
//! grid oracle. RL-BRT is warm-started from the Sample-BRT parameters.

use latent_reach::dynamics::{generate_toy_dataset, ToyDatasetConfig, TwoAttractorSystem};
use latent_reach::oracle::{compare_to_grid, grid_brt, AxisBounds};
use latent_reach::train::{train, train_from, TrainConfig, TrainMode};

fn main() -> latent_reach::Result<()> {
    let system = TwoAttractorSystem::default();
    let data = generate_toy_dataset(
        &system,
        &ToyDatasetConfig { count: 2000, horizon: 30, seed: 42, ..Default::default() },
    )?;
    let bounds = vec![AxisBounds { lo: -2.0, hi: 2.0 }; 2];
    let grid = grid_brt(&system, &system.failure_target(), &bounds, &[41, 41], 50)?;

    let config = |mode| {
        let mut cfg = TrainConfig::new(mode);
        cfg.hidden = (64, 32);
        cfg.epochs = 10;
        cfg
    };
    let sample = train(&data, &config(TrainMode::Sample))?;
    let rl = train_from(&data, &config(TrainMode::Rl), Some(sample.network.clone()))?;

    for (name, net) in [("sample", &sample.network), ("rl", &rl.network)] {
        let cmp = compare_to_grid(net, &grid, 0.05)?;
        println!(
            "{name:>6}: sign agreement {:.3}, mae {:.4}, mae(|V|>=0.05) {:.4}",
            cmp.sign_agreement,
            cmp.mae,
            cmp.mae_margin.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
