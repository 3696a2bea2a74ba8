//! On-disk formats: JSONL trajectory datasets and binary network checkpoints.

mod checkpoint;
mod dataset;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for_dim, save_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dataset::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, DATASET_SCHEMA};
