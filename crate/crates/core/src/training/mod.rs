//! Loss, learning-rate schedule, AdamW and the training loop.

pub mod loss;
pub mod optim;
pub mod schedule;
pub mod trainer;

pub use loss::{loss, LossKind, LossWeights};
pub use optim::{adamw_step, AdamW, AdamWConfig, Moments};
pub use schedule::WarmupSchedule;
pub use trainer::{
    dataset_loss, stack_windows, train, train_with, write_loss_csv, LossRecord, TrainConfig, TrainOutputs,
    TrainReport,
};
