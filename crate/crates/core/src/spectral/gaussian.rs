//! Diagonal Gaussian spectral distribution under reparameterization:
//! `omega = exp(log_sigma) .* eps + mu`.

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

use super::broadcast_row;

#[derive(Debug, Clone)]
pub struct GaussianSpectral {
    /// Length of one frequency vector (feature dim + time dim).
    pub dim: usize,
    prefix: String,
}

impl GaussianSpectral {
    pub fn new(dim: usize, prefix: &str) -> Self {
        assert!(dim >= 1);
        GaussianSpectral {
            dim,
            prefix: prefix.to_string(),
        }
    }

    pub fn mu_name(&self) -> String {
        format!("{}/mu", self.prefix)
    }

    pub fn log_sigma_name(&self) -> String {
        format!("{}/log_sigma", self.prefix)
    }

    /// mu = 0, log_sigma = 0: the sampler starts as the standard normal.
    pub fn register(&self, store: &mut ParamStore) {
        store.insert_zeros(&self.mu_name(), vec![self.dim]);
        store.insert_zeros(&self.log_sigma_name(), vec![self.dim]);
    }

    fn check_width(&self, width: usize) -> Result<usize> {
        if width == 0 || width % self.dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "gaussian spectral input width".into(),
                expected: self.dim,
                got: width,
            });
        }
        Ok(width / self.dim)
    }

    /// Differentiable reparameterized sample; `eps` has shape `[n, k*dim]`
    /// and the same (mu, sigma) applies to each `dim`-wide block.
    pub fn transform(&self, tape: &Tape, store: &ParamStore, eps: &Tensor) -> Result<Tensor> {
        let shape = eps.shape();
        if shape.len() != 2 {
            return Err(Error::DimensionMismatch {
                context: "gaussian spectral eps rank".into(),
                expected: 2,
                got: shape.len(),
            });
        }
        let (rows, width) = (shape[0], shape[1]);
        let blocks = self.check_width(width)?;
        let mu = tape.param(store, &self.mu_name())?;
        let sigma = tape.param(store, &self.log_sigma_name())?.exp();
        // Tile (sigma, mu) across blocks, broadcast across rows.
        let sigma_tiled = tile(&sigma, blocks)?;
        let mu_tiled = tile(&mu, blocks)?;
        let sigma_rows = broadcast_row(tape, &sigma_tiled, rows)?;
        let mu_rows = broadcast_row(tape, &mu_tiled, rows)?;
        eps.mul(&sigma_rows)?.add(&mu_rows)
    }

    /// Value-only version of [`GaussianSpectral::transform`].
    pub fn transform_values(&self, store: &ParamStore, eps: &[f64], rows: usize) -> Result<Vec<f64>> {
        if rows == 0 || eps.len() % rows != 0 {
            return Err(Error::DimensionMismatch {
                context: "gaussian spectral eps rows".into(),
                expected: rows.max(1),
                got: eps.len(),
            });
        }
        let width = eps.len() / rows;
        self.check_width(width)?;
        let mu = &store
            .get(&self.mu_name())
            .ok_or_else(|| Error::UnknownParameter(self.mu_name()))?
            .values;
        let log_sigma = &store
            .get(&self.log_sigma_name())
            .ok_or_else(|| Error::UnknownParameter(self.log_sigma_name()))?
            .values;
        let out = eps
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let d = (i % width) % self.dim;
                log_sigma[d].exp() * e + mu[d]
            })
            .collect();
        Ok(out)
    }
}

fn tile(v: &Tensor, blocks: usize) -> Result<Tensor> {
    if blocks == 1 {
        return Ok(v.clone());
    }
    let parts: Vec<&Tensor> = std::iter::repeat(v).take(blocks).collect();
    Tensor::concat(&parts, 0)
}
