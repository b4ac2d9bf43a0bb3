//! Parameterized spectral distributions with reparameterized sampling.
//!
//! Frequency samples are deterministic, differentiable transforms of frozen
//! auxiliary standard-normal draws, so the spectral parameters receive
//! gradients through the task loss. Two families are provided: a diagonal
//! Gaussian and an invertible affine-coupling flow with tractable log
//! densities via the change-of-variables formula.

mod coupling;
mod flow;
mod gaussian;

pub use coupling::CouplingLayer;
pub use flow::{AffineLayer, FlowSpectral};
pub use gaussian::GaussianSpectral;

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::Result;

/// A differentiable map from fixed auxiliary noise to frequency samples.
#[derive(Debug, Clone)]
pub enum SpectralSampler {
    Gaussian(GaussianSpectral),
    Flow(FlowSpectral),
}

impl SpectralSampler {
    /// Register this sampler's parameters (identity-initialized transforms,
    /// so sampling starts at the auxiliary standard normal).
    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        match self {
            SpectralSampler::Gaussian(g) => g.register(store),
            SpectralSampler::Flow(f) => f.register(store, rng),
        }
    }

    /// Width of auxiliary-noise rows this sampler accepts.
    pub fn input_width(&self) -> usize {
        match self {
            SpectralSampler::Gaussian(g) => g.dim,
            SpectralSampler::Flow(f) => f.dim,
        }
    }

    /// Differentiable transform of auxiliary rows `eps [n, width]` into
    /// frequency rows. The Gaussian applies its (mu, sigma) per `dim`-sized
    /// column block, so one diagonal Gaussian serves both the single-draw
    /// and the paired-draw layouts; the flow consumes full rows jointly.
    pub fn transform(&self, tape: &Tape, store: &ParamStore, eps: &Tensor) -> Result<Tensor> {
        match self {
            SpectralSampler::Gaussian(g) => g.transform(tape, store, eps),
            SpectralSampler::Flow(f) => f.transform(tape, store, eps),
        }
    }

    /// Value-only transform (no gradient tracking), same math as
    /// [`SpectralSampler::transform`].
    pub fn transform_values(&self, store: &ParamStore, eps: &[f64], rows: usize) -> Result<Vec<f64>> {
        match self {
            SpectralSampler::Gaussian(g) => g.transform_values(store, eps, rows),
            SpectralSampler::Flow(f) => {
                let (out, _log_det) = f.forward_values(store, eps, rows)?;
                Ok(out)
            }
        }
    }
}

/// Row-broadcast a vector parameter over `rows` rows.
pub(crate) fn broadcast_row(tape: &Tape, v: &Tensor, rows: usize) -> Result<Tensor> {
    let _ = tape;
    v.broadcast_rows(rows)
}
