//! Loss, optimizer, early-stopped training loop, and evaluation.

mod adam;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use trainer::{evaluate, mae_loss, train_loop, EpochRecord, TrainConfig, TrainOutcome};

#[cfg(test)]
mod tests;
