//! Persist a dataset and a checkpoint, then read both back.

use latent_reach::dynamics::{generate_toy_dataset, ToyDatasetConfig, TwoAttractorSystem};
use latent_reach::store::{load_checkpoint, read_dataset, save_checkpoint, write_dataset};
use latent_reach::train::{train, TrainConfig, TrainMode};

fn main() -> latent_reach::Result<()> {
    let dir = std::env::temp_dir().join(format!("latent-reach-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let data = generate_toy_dataset(
        &TwoAttractorSystem::default(),
        &ToyDatasetConfig { count: 100, horizon: 10, ..Default::default() },
    )?;
    let data_path = dir.join("toy.jsonl");
    write_dataset(&data_path, &data)?;
    assert_eq!(read_dataset(&data_path)?, data);
    println!("{} trajectories round-tripped through {}", data.len(), data_path.display());

    let mut cfg = TrainConfig::new(TrainMode::Sample);
    cfg.hidden = (16, 8);
    cfg.epochs = 2;
    let trained = train(&data, &cfg)?;
    let ckpt = dir.join("net.lrck");
    save_checkpoint(&ckpt, &trained.network, &trained.optimizer)?;
    let (net, opt) = load_checkpoint(&ckpt)?;
    assert_eq!(net, trained.network);
    println!("checkpoint: {} bytes, {} optimizer steps", std::fs::metadata(&ckpt)?.len(), opt.step);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
