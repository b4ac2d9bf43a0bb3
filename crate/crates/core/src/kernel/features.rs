//! Random Fourier feature maps.
//!
//! Stationary form over frequencies `w_i`:
//!
//! ```text
//! phi(t) = (1/sqrt m) [cos(t w_1), sin(t w_1), ..., cos(t w_m), sin(t w_m)]
//! ```
//!
//! Non-stationary form over frequency pairs `(w1_i, w2_i)` drawn from a
//! joint measure, with `z = [x, t]`:
//!
//! ```text
//! phi(z) = (1/(2 sqrt m)) [..., cos(z'w1_i) + cos(z'w2_i),
//!                               sin(z'w1_i) + sin(z'w2_i), ...]
//! ```
//!
//! The product `phi(z)'phi(z')` expands into all four `(w_a, w_b)` index
//! combinations per draw, which is exactly the symmetrised estimator of the
//! joint spectral measure; no resampling is involved, so the map is
//! deterministic given the frozen auxiliary draws.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::spectral::SpectralSampler;
use crate::util::rng_from_seed;

use super::KernelMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Single frequency per draw; `phi` depends on `z` only through `z'w`.
    Stationary,
    /// Frequency pairs from a joint measure (symmetrised on evaluation).
    Nonstationary,
}

/// Frozen auxiliary draws plus the layout of a feature map. The auxiliary
/// noise is drawn once at construction and never changes; all adaptation
/// happens in the spectral sampler's parameters.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub mode: FeatureMode,
    /// Number of Monte Carlo draws; output dimension is `2m`.
    pub m: usize,
    /// Input dimension `d + 1` (features plus time).
    pub dim: usize,
    eps: Vec<f64>,
}

impl FeatureMap {
    /// Draw and freeze the auxiliary noise.
    pub fn new(mode: FeatureMode, m: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let width = Self::eps_width_for(mode, dim);
        let eps = (0..m * width).map(|_| rng.sample(StandardNormal)).collect();
        FeatureMap { mode, m, dim, eps }
    }

    /// Rebuild from previously stored auxiliary draws (checkpoint reload).
    pub fn from_eps(mode: FeatureMode, m: usize, dim: usize, eps: Vec<f64>) -> Result<Self> {
        let width = Self::eps_width_for(mode, dim);
        if eps.len() != m * width {
            return Err(Error::DimensionMismatch {
                context: "feature map eps length".into(),
                expected: m * width,
                got: eps.len(),
            });
        }
        Ok(FeatureMap { mode, m, dim, eps })
    }

    fn eps_width_for(mode: FeatureMode, dim: usize) -> usize {
        match mode {
            FeatureMode::Stationary => dim,
            FeatureMode::Nonstationary => 2 * dim,
        }
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn eps_width(&self) -> usize {
        Self::eps_width_for(self.mode, self.dim)
    }

    pub fn output_dim(&self) -> usize {
        2 * self.m
    }

    /// Differentiable feature rows for inputs `z [n, dim]`, with frequencies
    /// reparameterized through `sampler`.
    pub fn phi(
        &self,
        tape: &Tape,
        store: &ParamStore,
        sampler: &SpectralSampler,
        z: &Tensor,
    ) -> Result<Tensor> {
        let shape = z.shape();
        if shape.len() != 2 || shape[1] != self.dim {
            return Err(Error::DimensionMismatch {
                context: "feature map input dim".into(),
                expected: self.dim,
                got: *shape.last().unwrap_or(&0),
            });
        }
        let n = shape[0];
        let eps = tape.constant(&[self.m, self.eps_width()], self.eps.clone());
        let omega = sampler.transform(tape, store, &eps)?;
        match self.mode {
            FeatureMode::Stationary => {
                let angles = z.matmul(&omega.transpose()?)?; // [n, m]
                interleave_scaled(tape, &angles.cos(), &angles.sin(), n, self.m, 1.0 / (self.m as f64).sqrt())
            }
            FeatureMode::Nonstationary => {
                let w1 = omega.slice(1, 0, self.dim)?;
                let w2 = omega.slice(1, self.dim, 2 * self.dim)?;
                let a1 = z.matmul(&w1.transpose()?)?;
                let a2 = z.matmul(&w2.transpose()?)?;
                let cos_sum = a1.cos().add(&a2.cos())?;
                let sin_sum = a1.sin().add(&a2.sin())?;
                interleave_scaled(tape, &cos_sum, &sin_sum, n, self.m, 0.5 / (self.m as f64).sqrt())
            }
        }
    }

    /// Value-only feature rows (no gradient tracking).
    pub fn phi_values(
        &self,
        store: &ParamStore,
        sampler: &SpectralSampler,
        z: &[f64],
        rows: usize,
    ) -> Result<Vec<f64>> {
        if z.len() != rows * self.dim {
            return Err(Error::DimensionMismatch {
                context: "feature map input size".into(),
                expected: rows * self.dim,
                got: z.len(),
            });
        }
        let omega = sampler.transform_values(store, &self.eps, self.m)?;
        let out = match self.mode {
            FeatureMode::Stationary => {
                let mut out = vec![0.0; rows * 2 * self.m];
                for r in 0..rows {
                    let zr = &z[r * self.dim..(r + 1) * self.dim];
                    phi_row_stationary(zr, &omega, self.dim, self.m, &mut out[r * 2 * self.m..(r + 1) * 2 * self.m]);
                }
                out
            }
            FeatureMode::Nonstationary => {
                let mut out = vec![0.0; rows * 2 * self.m];
                for r in 0..rows {
                    let zr = &z[r * self.dim..(r + 1) * self.dim];
                    phi_row_nonstationary(zr, &omega, self.dim, self.m, &mut out[r * 2 * self.m..(r + 1) * 2 * self.m]);
                }
                out
            }
        };
        Ok(out)
    }

    /// Gram matrix `G[i][j] = <phi(z_i), phi(z_j)>` over input rows.
    pub fn kernel_gram(
        &self,
        store: &ParamStore,
        sampler: &SpectralSampler,
        z: &[f64],
        rows: usize,
    ) -> Result<KernelMatrix> {
        let phi = self.phi_values(store, sampler, z, rows)?;
        Ok(gram_from_rows(&phi, rows, 2 * self.m))
    }
}

fn interleave_scaled(
    tape: &Tape,
    cos_part: &Tensor,
    sin_part: &Tensor,
    n: usize,
    m: usize,
    scale: f64,
) -> Result<Tensor> {
    let _ = tape;
    let c = cos_part.reshape(&[n, m, 1])?;
    let s = sin_part.reshape(&[n, m, 1])?;
    Ok(Tensor::concat(&[&c, &s], 2)?
        .reshape(&[n, 2 * m])?
        .scale(scale))
}

fn phi_row_stationary(z: &[f64], omega: &[f64], dim: usize, m: usize, out: &mut [f64]) {
    let scale = 1.0 / (m as f64).sqrt();
    for i in 0..m {
        let mut angle = 0.0;
        for d in 0..dim {
            angle += z[d] * omega[i * dim + d];
        }
        out[2 * i] = scale * angle.cos();
        out[2 * i + 1] = scale * angle.sin();
    }
}

fn phi_row_nonstationary(z: &[f64], omega: &[f64], dim: usize, m: usize, out: &mut [f64]) {
    let scale = 0.5 / (m as f64).sqrt();
    let width = 2 * dim;
    for i in 0..m {
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        for d in 0..dim {
            a1 += z[d] * omega[i * width + d];
            a2 += z[d] * omega[i * width + dim + d];
        }
        out[2 * i] = scale * (a1.cos() + a2.cos());
        out[2 * i + 1] = scale * (a1.sin() + a2.sin());
    }
}

/// Stationary random feature vector of a scalar time against explicit
/// frequencies: `(1/sqrt m)[cos(t w_1), sin(t w_1), ...]`.
pub fn phi_stationary(t: f64, freqs: &[f64]) -> Vec<f64> {
    let m = freqs.len();
    let mut out = vec![0.0; 2 * m];
    phi_row_stationary(&[t], freqs, 1, m, &mut out);
    out
}

/// Non-stationary random feature vector for `z` against explicit frequency
/// pairs; `omega1`/`omega2` are `[m, dim]` row-major.
pub fn phi_nonstationary(z: &[f64], omega1: &[f64], omega2: &[f64]) -> Vec<f64> {
    let dim = z.len();
    assert_eq!(omega1.len(), omega2.len());
    assert_eq!(omega1.len() % dim, 0, "omega rows must match z dimension");
    let m = omega1.len() / dim;
    let scale = 0.5 / (m as f64).sqrt();
    let mut out = vec![0.0; 2 * m];
    for i in 0..m {
        let mut a1 = 0.0;
        let mut a2 = 0.0;
        for d in 0..dim {
            a1 += z[d] * omega1[i * dim + d];
            a2 += z[d] * omega2[i * dim + d];
        }
        out[2 * i] = scale * (a1.cos() + a2.cos());
        out[2 * i + 1] = scale * (a1.sin() + a2.sin());
    }
    out
}

/// `G = F F'` for feature rows `F [n, k]`.
pub fn gram_from_rows(features: &[f64], n: usize, k: usize) -> KernelMatrix {
    assert_eq!(features.len(), n * k);
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for c in 0..k {
                s += features[i * k + c] * features[j * k + c];
            }
            gram[i][j] = s;
            gram[j][i] = s;
        }
    }
    gram
}
