//! The two frame classifiers, their training loop and checkpoints.

mod checkpoint;
mod config;
mod network;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, NamedTensor,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use config::{Architecture, ConvLayer, ModelConfig, TrainConfig, SAMPLES_PER_FRAME};
pub use network::{build_model, ConvBlock, ForwardCache, Network, NetworkObjective};
pub use train::{
    class_weights, eval_batches, evaluate, train, train_with_progress, Batch, EpochLog,
    TrainExample, TrainLog, TrainOutcome, Trainer,
};

use crate::audio::AudioError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
