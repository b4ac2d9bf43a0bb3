//! Finite-width empirical counterparts of the analytic recursions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{ParamStore, Tape};
use crate::error::{Error, Result};
use crate::kernel::{FeatureMap, KernelMatrix};
use crate::models::{Activation, Mlp};
use crate::spectral::{GaussianSpectral, SpectralSampler};
use crate::util::rng_from_seed;

/// Average over fresh weight draws of the width-normalized inner products of
/// composed first-layer outputs `f^(1)(x) (x) phi(x, t)`. The feature rows
/// are fixed (frozen map, identity Gaussian sampler); the randomness is the
/// layer weights, matching the infinite-width limit being checked.
pub fn empirical_composed_covariance(
    x: &[f64],
    times: &[f64],
    n: usize,
    d: usize,
    width: usize,
    feature_map: &FeatureMap,
    n_draws: usize,
    seed: u64,
) -> Result<(KernelMatrix, KernelMatrix)> {
    if x.len() != n * d || times.len() != n {
        return Err(Error::DimensionMismatch {
            context: "empirical_composed_covariance inputs".into(),
            expected: n * d,
            got: x.len(),
        });
    }
    let dim = d + 1;
    let sampler = SpectralSampler::Gaussian(GaussianSpectral::new(dim, "spectral"));
    let mut sampler_store = ParamStore::new();
    sampler.register(&mut sampler_store, &mut rng_from_seed(seed ^ 0x5eed));
    let mut z = vec![0.0; n * dim];
    for i in 0..n {
        z[i * dim..i * dim + d].copy_from_slice(&x[i * d..(i + 1) * d]);
        z[i * dim + d] = times[i];
    }
    let phi = feature_map.phi_values(&sampler_store, &sampler, &z, n)?;
    let two_m = feature_map.output_dim();
    let kt: KernelMatrix = crate::kernel::gram_from_rows(&phi, n, two_m);

    let mut rng = rng_from_seed(seed);
    let mut gram = vec![vec![0.0; n]; n];
    let mut weights = vec![0.0; d * width];
    let mut bias = vec![0.0; width];
    let mut hidden = vec![0.0; n * width];
    let mut composed = vec![0.0; n * width * two_m];
    for _ in 0..n_draws {
        for w in weights.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        for b in bias.iter_mut() {
            *b = rng.sample(StandardNormal);
        }
        let scale = 1.0 / (d as f64).sqrt();
        for i in 0..n {
            for j in 0..width {
                let mut s = 0.0;
                for c in 0..d {
                    s += x[i * d + c] * weights[c * width + j];
                }
                hidden[i * width + j] = scale * s + bias[j];
            }
        }
        // composed_i = vec(f_i (x) phi_i), materialized honestly
        for i in 0..n {
            for a in 0..width {
                let f = hidden[i * width + a];
                let dst = i * width * two_m + a * two_m;
                for b in 0..two_m {
                    composed[dst + b] = f * phi[i * two_m + b];
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let (ci, cj) = (
                    &composed[i * width * two_m..(i + 1) * width * two_m],
                    &composed[j * width * two_m..(j + 1) * width * two_m],
                );
                let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                gram[i][j] += dot / width as f64;
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            gram[i][j] /= n_draws as f64;
            gram[j][i] = gram[i][j];
        }
    }
    Ok((gram, kt))
}

/// A concrete two-layer relu network with the temporal composition at the
/// hidden layer, used for empirical tangent-kernel measurements.
pub struct EmpiricalNet {
    pub base: Mlp,
    pub head: Mlp,
    pub feature_map: FeatureMap,
    pub sampler: SpectralSampler,
    pub sampler_store: ParamStore,
    pub width: usize,
    pub d: usize,
}

impl EmpiricalNet {
    pub fn new(d: usize, width: usize, m: usize, eps_seed: u64) -> Self {
        let dim = d + 1;
        let feature_map = FeatureMap::new(crate::kernel::FeatureMode::Nonstationary, m, dim, eps_seed);
        let sampler = SpectralSampler::Gaussian(GaussianSpectral::new(dim, "spectral"));
        let mut sampler_store = ParamStore::new();
        sampler.register(&mut sampler_store, &mut rng_from_seed(eps_seed ^ 0xabcd));
        let base = Mlp::new(vec![d, width], Activation::Relu, "net/base");
        let head = Mlp::new(vec![width * 2 * m, 1], Activation::Relu, "net/head")
            .head()
            .with_first_layer_scale(1.0 / (width as f64).sqrt());
        EmpiricalNet {
            base,
            head,
            feature_map,
            sampler,
            sampler_store,
            width,
            d,
        }
    }

    pub fn register(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        self.base.register(store, rng);
        self.head.register(store, rng);
    }

    /// Feature rows for `(x, t)` inputs.
    pub fn phi_rows(&self, x: &[f64], times: &[f64], n: usize) -> Result<Vec<f64>> {
        let dim = self.d + 1;
        let mut z = vec![0.0; n * dim];
        for i in 0..n {
            z[i * dim..i * dim + self.d].copy_from_slice(&x[i * self.d..(i + 1) * self.d]);
            z[i * dim + self.d] = times[i];
        }
        self.feature_map
            .phi_values(&self.sampler_store, &self.sampler, &z, n)
    }

    /// Scalar output for one `(x, t)`; `phi_row` is the matching feature row.
    fn output_on_tape(
        &self,
        tape: &Tape,
        store: &ParamStore,
        x_row: &[f64],
        phi_row: &[f64],
    ) -> Result<crate::autodiff::Tensor> {
        let x = tape.constant(&[1, self.d], x_row.to_vec());
        let hidden = self.base.output(tape, store, &x, true)?;
        let phi = tape.constant(&[1, phi_row.len()], phi_row.to_vec());
        let composed = hidden.outer(&phi)?;
        self.head.output(tape, store, &composed, true)
    }
}

/// Empirical tangent kernel of one weight draw:
/// `Theta[i][j] = <df/dtheta (z_i), df/dtheta (z_j)>` via reverse-mode
/// sweeps, one per input.
pub fn empirical_ntk(
    net: &EmpiricalNet,
    store: &mut ParamStore,
    x: &[f64],
    times: &[f64],
    n: usize,
) -> Result<KernelMatrix> {
    let phi = net.phi_rows(x, times, n)?;
    let two_m = net.feature_map.output_dim();
    let names: Vec<String> = store.names().cloned().collect();
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let tape = Tape::new();
        let out = net.output_on_tape(
            &tape,
            store,
            &x[i * net.d..(i + 1) * net.d],
            &phi[i * two_m..(i + 1) * two_m],
        )?;
        let scalar = out.reshape(&[])?;
        tape.backward(&scalar)?;
        store.zero_grads();
        tape.accumulate_grads(store)?;
        let mut flat = Vec::with_capacity(store.total_values());
        for name in &names {
            flat.extend_from_slice(&store.get(name).unwrap().grad);
        }
        grads.push(flat);
    }
    let mut theta = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
            theta[i][j] = dot;
            theta[j][i] = dot;
        }
    }
    Ok(theta)
}

/// The temporal Gram matrix the analytic recursion should be fed for this
/// net's frozen feature map.
pub fn feature_gram(net: &EmpiricalNet, x: &[f64], times: &[f64], n: usize) -> Result<KernelMatrix> {
    let phi = net.phi_rows(x, times, n)?;
    Ok(crate::kernel::gram_from_rows(&phi, n, net.feature_map.output_dim()))
}
