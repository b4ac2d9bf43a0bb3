//! Batch-wise training with early stopping on validation MAE, returning the
//! parameters from the best validation epoch.

use rand::seq::SliceRandom;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::data::{Example, Stats};
use crate::error::{Error, Result};
use crate::models::{Batch, Model};
use crate::util::rng_from_seed;

use super::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once validation MAE has not improved for this many epochs.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 64,
            max_epochs: 200,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParameter(
                "batch size and max epochs must be positive".into(),
            ));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps_adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
}

/// Mean absolute error between predictions `[n,1]` and targets `[n,1]`.
pub fn mae_loss(pred: &Tensor, targets: &Tensor) -> Result<Tensor> {
    Ok(pred.sub(targets)?.abs().mean())
}

/// Normalized-unit MAE over a set of examples, evaluated without gradients.
fn mae_over(model: &Model, store: &ParamStore, examples: &[Example], batch_size: usize) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidData("empty evaluation set".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in examples.chunks(batch_size) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let batch = Batch::from_examples(&refs)?;
        let tape = Tape::new();
        let pred = model.predict(&tape, store, &batch, false)?;
        let values = pred.values();
        for (p, y) in values.iter().zip(&batch.targets) {
            total += (p - y).abs();
        }
        count += chunk.len();
    }
    Ok(total / count as f64)
}

/// Test-set MAE in original target units.
pub fn evaluate(
    model: &Model,
    store: &ParamStore,
    examples: &[Example],
    stats: &Stats,
    batch_size: usize,
) -> Result<f64> {
    Ok(mae_over(model, store, examples, batch_size)? * stats.target_std)
}

/// Run the training loop. On return `store` holds the parameters of the
/// best validation epoch. Bit-deterministic for a fixed config and seed.
pub fn train_loop(
    model: &Model,
    store: &mut ParamStore,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidData("training needs non-empty train and val sets".into()));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut adam = AdamState::new();
    let adam_cfg = cfg.adam();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_snapshot = store.snapshot();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = Batch::from_examples(&refs)?;
            let tape = Tape::new();
            let pred = model.predict(&tape, store, &batch, true)?;
            let targets = batch.targets_tensor(&tape);
            let loss = mae_loss(&pred, &targets)?;
            let loss_value = loss.scalar_value();
            if !loss_value.is_finite() {
                let culprit = tape
                    .first_nonfinite()
                    .unwrap_or_else(|| "unknown tensor".into());
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}; first non-finite: {culprit}"),
                });
            }
            tape.backward(&loss)?;
            store.zero_grads();
            tape.accumulate_grads(store)?;
            adam_step(store, &mut adam, &adam_cfg);
            loss_sum += loss_value * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = loss_sum / seen as f64;
        let val_mae = mae_over(model, store, val, cfg.batch_size)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_mae,
        });
        if val_mae < best_val {
            best_val = val_mae;
            best_epoch = epoch;
            best_snapshot = store.snapshot();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    store.restore(&best_snapshot);
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_mae: best_val,
    })
}
