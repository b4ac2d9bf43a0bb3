//! Temporal-kernel composition of base networks, and the time-concat /
//! trigonometric baselines. All models consume timespan-transformed
//! examples: history times hold the span to the prediction target.

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::data::Example;
use crate::error::{Error, Result};
use crate::kernel::FeatureMap;
use crate::spectral::SpectralSampler;

use super::{Gru, Mlp, Predict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    /// Flattened outer product `vec(f ⊗ phi)`; inner products factor into
    /// the product of hidden and feature inner products.
    Multiply,
    /// Elementwise sum; requires the feature dimension `2m` to equal the
    /// hidden width.
    Add,
}

/// Compose a hidden batch `[n, d_h]` (or vector `[d_h]`) with feature rows
/// of matching rank.
pub fn compose_hidden(hidden: &Tensor, phi: &Tensor, mode: ComposeMode) -> Result<Tensor> {
    match mode {
        ComposeMode::Multiply => {
            let out = hidden.outer(phi)?;
            if hidden.shape().len() == 1 {
                let n = out.numel();
                out.reshape(&[n])
            } else {
                Ok(out)
            }
        }
        ComposeMode::Add => {
            let (hs, ps) = (hidden.shape(), phi.shape());
            if hs != ps {
                return Err(Error::ShapeMismatch {
                    op: "compose-add",
                    lhs: hs,
                    rhs: ps,
                });
            }
            hidden.add(phi)
        }
    }
}

/// Learnable trigonometric time features: `[sin(pi_j tau), cos(pi_j tau)]`
/// for `j = 1..k`, with the frequencies `pi_j` free parameters.
pub fn trigo_features(
    tape: &Tape,
    store: &ParamStore,
    tau: &Tensor,
    prefix: &str,
    trainable: bool,
) -> Result<Tensor> {
    let name = format!("{prefix}/pi");
    let pi = if trainable {
        tape.param(store, &name)?
    } else {
        tape.param_frozen(store, &name)?
    };
    let k = pi.numel();
    let angles = tau.matmul(&pi.reshape(&[1, k])?)?;
    Tensor::concat(&[&angles.sin(), &angles.cos()], 1)
}

pub fn register_trigo(store: &mut ParamStore, k: usize, prefix: &str, rng: &mut impl Rng) {
    store.insert_normal(&format!("{prefix}/pi"), vec![k], rng);
}

/// Per-step time handling of the baseline models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeFeatures {
    /// Concatenate the raw timespan.
    Concat,
    /// Concatenate `2k` learnable sine/cosine features of the timespan.
    Trigo { k: usize },
}

impl TimeFeatures {
    pub fn extra_dims(&self) -> usize {
        match self {
            TimeFeatures::Concat => 1,
            TimeFeatures::Trigo { k } => 2 * k,
        }
    }
}

/// A uniform-length batch of timespan-transformed examples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n: usize,
    pub q: usize,
    pub dim: usize,
    /// `q` step feature blocks, each `[n * dim]` row-major.
    step_features: Vec<Vec<f64>>,
    /// `q` step timespan columns, each `[n]`.
    step_times: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn from_examples(examples: &[&Example]) -> Result<Batch> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidData("empty batch".into()))?;
        let (q, dim) = (first.len(), first.dim);
        let n = examples.len();
        for ex in examples {
            if ex.len() != q || ex.dim != dim {
                return Err(Error::InvalidData(
                    "batch requires equal history length and feature dim".into(),
                ));
            }
        }
        let mut step_features = vec![vec![0.0; n * dim]; q];
        let mut step_times = vec![vec![0.0; n]; q];
        let mut targets = Vec::with_capacity(n);
        for (row, ex) in examples.iter().enumerate() {
            for step in 0..q {
                step_features[step][row * dim..(row + 1) * dim]
                    .copy_from_slice(&ex.features[step * dim..(step + 1) * dim]);
                step_times[step][row] = ex.times[step];
            }
            targets.push(ex.target);
        }
        Ok(Batch {
            n,
            q,
            dim,
            step_features,
            step_times,
            targets,
        })
    }

    pub fn step_features(&self, tape: &Tape, step: usize) -> Tensor {
        tape.constant(&[self.n, self.dim], self.step_features[step].clone())
    }

    pub fn step_times(&self, tape: &Tape, step: usize) -> Tensor {
        tape.constant(&[self.n, 1], self.step_times[step].clone())
    }

    /// All history features flattened per example: `[n, q*dim]`.
    pub fn flat_features(&self, tape: &Tape) -> Tensor {
        let mut data = vec![0.0; self.n * self.q * self.dim];
        for step in 0..self.q {
            for row in 0..self.n {
                let dst = row * self.q * self.dim + step * self.dim;
                data[dst..dst + self.dim]
                    .copy_from_slice(&self.step_features[step][row * self.dim..(row + 1) * self.dim]);
            }
        }
        tape.constant(&[self.n, self.q * self.dim], data)
    }

    /// All history timespans per example: `[n, q]`.
    pub fn flat_times(&self, tape: &Tape) -> Tensor {
        let mut data = vec![0.0; self.n * self.q];
        for step in 0..self.q {
            for row in 0..self.n {
                data[row * self.q + step] = self.step_times[step][row];
            }
        }
        tape.constant(&[self.n, self.q], data)
    }

    pub fn targets_tensor(&self, tape: &Tape) -> Tensor {
        tape.constant(&[self.n, 1], self.targets.clone())
    }
}

/// GRU composed with a temporal feature map at the hidden output. The
/// recurrence itself never sees time; all temporal information enters
/// through `phi([x, tau])` at the composition point, evaluated at the most
/// recent step before the readout.
#[derive(Debug, Clone)]
pub struct TemporalGru {
    pub gru: Gru,
    pub head: Mlp,
    pub mode: ComposeMode,
    pub feature_map: FeatureMap,
    pub sampler: SpectralSampler,
}

impl Predict for TemporalGru {
    fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.gru.register(store, rng);
        self.head.register(store, rng);
        self.sampler.register(store, rng);
    }

    fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor> {
        let steps: Vec<Tensor> = (0..batch.q).map(|s| batch.step_features(tape, s)).collect();
        let z_at = |s: usize| -> Result<Tensor> {
            let tau = batch.step_times(tape, s);
            if self.feature_map.dim == 1 {
                Ok(tau)
            } else {
                Tensor::concat(&[&batch.step_features(tape, s), &tau], 1)
            }
        };
        match self.mode {
            // The composed hidden out is the state the next cell sees: the
            // feature rows are added to every step's hidden output, and the
            // readout consumes the final composed state.
            ComposeMode::Add => {
                let mut inject = Vec::with_capacity(batch.q);
                for s in 0..batch.q {
                    let phi = self.feature_map.phi(tape, store, &self.sampler, &z_at(s)?)?;
                    inject.push(phi);
                }
                let hiddens =
                    self.gru
                        .forward_injected(tape, store, &steps, Some(&inject), trainable)?;
                self.head
                    .output(tape, store, hiddens.last().expect("non-empty"), trainable)
            }
            // Outer-product composition grows the dimension, so it lives on
            // the readout branch: the final hidden is composed with the
            // feature row of the most recent step.
            ComposeMode::Multiply => {
                let hiddens = self.gru.forward(tape, store, &steps, trainable)?;
                let last_hidden = hiddens.last().expect("non-empty sequence");
                let phi =
                    self.feature_map
                        .phi(tape, store, &self.sampler, &z_at(batch.q - 1)?)?;
                let composed = compose_hidden(last_hidden, &phi, self.mode)?;
                self.head.output(tape, store, &composed, trainable)
            }
        }
    }
}

/// Feedforward network composed with the feature map at layer `h` of the
/// base block; the head continues the network over the composed vector.
/// The feature-map input is the flattened history plus the timespan of the
/// most recent observation.
#[derive(Debug, Clone)]
pub struct TemporalFfn {
    pub base: Mlp,
    pub head: Mlp,
    pub mode: ComposeMode,
    pub feature_map: FeatureMap,
    pub sampler: SpectralSampler,
}

impl Predict for TemporalFfn {
    fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.base.register(store, rng);
        self.head.register(store, rng);
        self.sampler.register(store, rng);
    }

    fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor> {
        let x = batch.flat_features(tape);
        let hidden = self.base.output(tape, store, &x, trainable)?;
        let tau = batch.step_times(tape, batch.q - 1);
        let z = if self.feature_map.dim == 1 {
            tau
        } else {
            Tensor::concat(&[&x, &tau], 1)?
        };
        let phi = self.feature_map.phi(tape, store, &self.sampler, &z)?;
        let composed = compose_hidden(&hidden, &phi, self.mode)?;
        self.head.output(tape, store, &composed, trainable)
    }
}

/// GRU baseline: time enters by concatenating per-step features
/// (raw timespan or learnable trigonometric features).
#[derive(Debug, Clone)]
pub struct BaselineGru {
    pub gru: Gru,
    pub head: Mlp,
    pub time: TimeFeatures,
    pub trigo_prefix: String,
}

impl Predict for BaselineGru {
    fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.gru.register(store, rng);
        self.head.register(store, rng);
        if let TimeFeatures::Trigo { k } = self.time {
            register_trigo(store, k, &self.trigo_prefix, rng);
        }
    }

    fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor> {
        let mut steps = Vec::with_capacity(batch.q);
        for s in 0..batch.q {
            let x = batch.step_features(tape, s);
            let tau = batch.step_times(tape, s);
            let step = match self.time {
                TimeFeatures::Concat => Tensor::concat(&[&x, &tau], 1)?,
                TimeFeatures::Trigo { .. } => {
                    let trig = trigo_features(tape, store, &tau, &self.trigo_prefix, trainable)?;
                    Tensor::concat(&[&x, &trig], 1)?
                }
            };
            steps.push(step);
        }
        let hiddens = self.gru.forward(tape, store, &steps, trainable)?;
        self.head.output(tape, store, hiddens.last().unwrap(), trainable)
    }
}

/// Feedforward baseline over the flattened history. Time enters as all
/// timespans (concat) or trigonometric features of the most recent one.
#[derive(Debug, Clone)]
pub struct BaselineFfn {
    pub net: Mlp,
    pub time: TimeFeatures,
    pub trigo_prefix: String,
}

impl Predict for BaselineFfn {
    fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.net.register(store, rng);
        if let TimeFeatures::Trigo { k } = self.time {
            register_trigo(store, k, &self.trigo_prefix, rng);
        }
    }

    fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor> {
        let x = batch.flat_features(tape);
        let input = match self.time {
            TimeFeatures::Concat => Tensor::concat(&[&x, &batch.flat_times(tape)], 1)?,
            TimeFeatures::Trigo { .. } => {
                let tau = batch.step_times(tape, batch.q - 1);
                let trig = trigo_features(tape, store, &tau, &self.trigo_prefix, trainable)?;
                Tensor::concat(&[&x, &trig], 1)?
            }
        };
        self.net.output(tape, store, &input, trainable)
    }
}

/// The model zoo the CLI trains and evaluates.
#[derive(Debug, Clone)]
pub enum Model {
    TemporalGru(TemporalGru),
    TemporalFfn(TemporalFfn),
    BaselineGru(BaselineGru),
    BaselineFfn(BaselineFfn),
}

impl Model {
    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        match self {
            Model::TemporalGru(m) => m.register(store, rng),
            Model::TemporalFfn(m) => m.register(store, rng),
            Model::BaselineGru(m) => m.register(store, rng),
            Model::BaselineFfn(m) => m.register(store, rng),
        }
    }

    pub fn predict(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &Batch,
        trainable: bool,
    ) -> Result<Tensor> {
        match self {
            Model::TemporalGru(m) => m.predict(tape, store, batch, trainable),
            Model::TemporalFfn(m) => m.predict(tape, store, batch, trainable),
            Model::BaselineGru(m) => m.predict(tape, store, batch, trainable),
            Model::BaselineFfn(m) => m.predict(tape, store, batch, trainable),
        }
    }

    /// Frozen auxiliary draws of the feature map, when the model has one.
    pub fn feature_eps(&self) -> Option<&[f64]> {
        match self {
            Model::TemporalGru(m) => Some(m.feature_map.eps()),
            Model::TemporalFfn(m) => Some(m.feature_map.eps()),
            _ => None,
        }
    }
}
