//! Base networks (feedforward, GRU) and their temporal-kernel composition,
//! plus the time-concat and trigonometric-feature baselines.

mod ffn;
mod gru;
mod temporal;

pub use ffn::{Activation, Mlp};
pub use gru::Gru;
pub use temporal::{
    compose_hidden, register_trigo, trigo_features, BaselineFfn, BaselineGru, Batch, ComposeMode, Model,
    TemporalFfn, TemporalGru, TimeFeatures,
};

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::Result;

/// Forward surface shared by every trainable model in the zoo.
pub trait Predict {
    /// Register all parameters (and draw any frozen auxiliary noise).
    fn register(&self, store: &mut ParamStore, rng: &mut impl rand::Rng)
    where
        Self: Sized;

    /// Batched predictions `[n, 1]`. With `trainable = false` parameters
    /// enter the tape as constants (evaluation mode).
    fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor>;
}

#[cfg(test)]
mod tests;
