//! Normalizing flow over frequency space: a learnable elementwise affine
//! layer followed by a stack of affine coupling layers with a fixed
//! half-swap permutation between consecutive layers. Base distribution is
//! the standard normal. For 1-dimensional frequency spaces the coupling
//! stack is empty and the affine layer carries the whole transform.

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};

use super::coupling::CouplingLayer;

const LN_2PI: f64 = 1.8378770664093453;

/// Learnable elementwise map `v = z .* exp(a) + b`, identity-initialized.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    pub dim: usize,
    prefix: String,
}

impl AffineLayer {
    pub fn new(dim: usize, prefix: &str) -> Self {
        AffineLayer {
            dim,
            prefix: prefix.to_string(),
        }
    }

    fn log_scale_name(&self) -> String {
        format!("{}/log_scale", self.prefix)
    }

    fn shift_name(&self) -> String {
        format!("{}/shift", self.prefix)
    }

    pub fn register(&self, store: &mut ParamStore) {
        store.insert_zeros(&self.log_scale_name(), vec![self.dim]);
        store.insert_zeros(&self.shift_name(), vec![self.dim]);
    }

    fn params<'a>(&self, store: &'a ParamStore) -> Result<(&'a [f64], &'a [f64])> {
        let a = store
            .get(&self.log_scale_name())
            .ok_or_else(|| Error::UnknownParameter(self.log_scale_name()))?;
        let b = store
            .get(&self.shift_name())
            .ok_or_else(|| Error::UnknownParameter(self.shift_name()))?;
        Ok((&a.values, &b.values))
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, z: &Tensor) -> Result<Tensor> {
        let rows = z.shape()[0];
        let scale = tape.param(store, &self.log_scale_name())?.exp();
        let shift = tape.param(store, &self.shift_name())?;
        let scale_rows = super::broadcast_row(tape, &scale, rows)?;
        let shift_rows = super::broadcast_row(tape, &shift, rows)?;
        z.mul(&scale_rows)?.add(&shift_rows)
    }

    pub fn forward_values(&self, store: &ParamStore, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (a, b) = self.params(store)?;
        let out = z
            .iter()
            .enumerate()
            .map(|(i, v)| v * a[i % self.dim].exp() + b[i % self.dim])
            .collect();
        Ok((out, a.iter().sum()))
    }

    pub fn inverse_values(&self, store: &ParamStore, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (a, b) = self.params(store)?;
        let out = v
            .iter()
            .enumerate()
            .map(|(i, x)| (x - b[i % self.dim]) * (-a[i % self.dim]).exp())
            .collect();
        Ok((out, a.iter().sum()))
    }
}

#[derive(Debug, Clone)]
pub struct FlowSpectral {
    /// Frequency-space dimension the flow transforms.
    pub dim: usize,
    pub affine: AffineLayer,
    pub couplings: Vec<CouplingLayer>,
}

impl FlowSpectral {
    /// `n_couplings` coupling layers of hidden width `hidden`. With
    /// `dim < 2` no coupling layer is possible and the stack is empty.
    pub fn new(dim: usize, n_couplings: usize, hidden: usize, prefix: &str) -> Self {
        assert!(dim >= 1);
        let affine = AffineLayer::new(dim, &format!("{prefix}/affine"));
        let couplings = if dim >= 2 {
            (0..n_couplings)
                .map(|q| CouplingLayer::new(q, dim, hidden, &format!("{prefix}/c{q}")))
                .collect()
        } else {
            Vec::new()
        };
        FlowSpectral {
            dim,
            affine,
            couplings,
        }
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.affine.register(store);
        for layer in &self.couplings {
            layer.register(store, rng);
        }
    }

    /// Differentiable sampling direction: auxiliary rows -> frequency rows.
    pub fn transform(&self, tape: &Tape, store: &ParamStore, eps: &Tensor) -> Result<Tensor> {
        let shape = eps.shape();
        if shape.len() != 2 || shape[1] != self.dim {
            return Err(Error::DimensionMismatch {
                context: "flow input width".into(),
                expected: self.dim,
                got: *shape.last().unwrap_or(&0),
            });
        }
        let mut z = self.affine.forward(tape, store, eps)?;
        for (q, layer) in self.couplings.iter().enumerate() {
            z = layer.forward(tape, store, &z)?;
            if q + 1 < self.couplings.len() {
                z = swap_halves_tape(&z, self.dim)?;
            }
        }
        Ok(z)
    }

    /// Value-only sampling direction; returns `(omega rows, per-row log|det J|)`.
    pub fn forward_values(&self, store: &ParamStore, eps: &[f64], rows: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_rows(eps, rows)?;
        let (mut z, affine_ld) = self.affine.forward_values(store, eps)?;
        let mut log_det = vec![affine_ld; rows];
        for (q, layer) in self.couplings.iter().enumerate() {
            let (v, ld) = layer.forward_values(store, &z, rows)?;
            z = v;
            for (acc, d) in log_det.iter_mut().zip(&ld) {
                *acc += d;
            }
            if q + 1 < self.couplings.len() {
                z = swap_halves_values(&z, rows, self.dim, self.dim / 2);
            }
        }
        Ok((z, log_det))
    }

    /// Exact inverse: frequency rows -> auxiliary rows, with the forward
    /// log-determinants accumulated along the path.
    pub fn inverse_values(&self, store: &ParamStore, x: &[f64], rows: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_rows(x, rows)?;
        let mut v = x.to_vec();
        let mut log_det = vec![0.0; rows];
        for (q, layer) in self.couplings.iter().enumerate().rev() {
            if q + 1 < self.couplings.len() {
                // Undo the swap that followed layer q in the forward pass.
                let k = self.dim / 2;
                v = swap_halves_values(&v, rows, self.dim, self.dim - k);
            }
            let (z, ld) = layer.inverse_values(store, &v, rows)?;
            v = z;
            for (acc, d) in log_det.iter_mut().zip(&ld) {
                *acc += d;
            }
        }
        let (z, affine_ld) = self.affine.inverse_values(store, &v)?;
        for acc in log_det.iter_mut() {
            *acc += affine_ld;
        }
        Ok((z, log_det))
    }

    /// `log p(x)` per row via change of variables: base log-density at the
    /// inverse image minus the accumulated forward log-determinants.
    pub fn log_density(&self, store: &ParamStore, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        let (z, log_det) = self.inverse_values(store, x, rows)?;
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            let row = &z[r * self.dim..(r + 1) * self.dim];
            let base: f64 = row.iter().map(|v| -0.5 * (v * v + LN_2PI)).sum();
            out[r] = base - log_det[r];
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "flow log-density".into(),
            });
        }
        Ok(out)
    }

    fn check_rows(&self, data: &[f64], rows: usize) -> Result<()> {
        if rows == 0 || data.len() != rows * self.dim {
            return Err(Error::DimensionMismatch {
                context: "flow input size".into(),
                expected: rows * self.dim,
                got: data.len(),
            });
        }
        Ok(())
    }
}

/// Move the leading `k` columns behind the rest.
fn swap_halves_values(data: &[f64], rows: usize, dim: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for r in 0..rows {
        let row = &data[r * dim..(r + 1) * dim];
        out.extend_from_slice(&row[k..]);
        out.extend_from_slice(&row[..k]);
    }
    out
}

fn swap_halves_tape(z: &Tensor, dim: usize) -> Result<Tensor> {
    let k = dim / 2;
    let first = z.slice(1, 0, k)?;
    let rest = z.slice(1, k, dim)?;
    Tensor::concat(&[&rest, &first], 1)
}
