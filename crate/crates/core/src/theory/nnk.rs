//! Analytic infinite-width recursions.
//!
//! Layer covariances over an input set follow
//!
//! ```text
//! S^(1)(x, x') = x'x / d + 1
//! S^(h)(x, x') = E_{f ~ N(0, S^(h-1))}[relu(f(x)) relu(f(x'))] + 1
//! ```
//!
//! with the relu expectations in arc-cosine closed form. Composing a
//! temporal feature map at layer `k` replaces `S^(k)` by `S^(k) .* K_T` and
//! continues the same recursion; the tangent kernel accumulates layer terms
//! through `Theta^(h) = Theta^(h-1) .* dS^(h) + S^(h)`.

use crate::error::{Error, Result};
use crate::kernel::{compose_kernel, KernelMatrix};

/// `E[relu(u) relu(v)]` for `(u,v) ~ N(0, [[a, c], [c, b]])`.
pub fn relu_expectation(a: f64, b: f64, c: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    let norm = (a * b).sqrt();
    let rho = (c / norm).clamp(-1.0, 1.0);
    let theta = rho.acos();
    norm / (2.0 * std::f64::consts::PI) * (theta.sin() + (std::f64::consts::PI - theta) * rho)
}

/// `E[relu'(u) relu'(v)]` for the same Gaussian (order-0 arc-cosine form).
pub fn relu_derivative_expectation(a: f64, b: f64, c: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    let rho = (c / (a * b).sqrt()).clamp(-1.0, 1.0);
    (std::f64::consts::PI - rho.acos()) / (2.0 * std::f64::consts::PI)
}

fn gaussian_layer_step(prev: &KernelMatrix) -> KernelMatrix {
    let n = prev.len();
    let mut next = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = relu_expectation(prev[i][i], prev[j][j], prev[i][j]) + 1.0;
            next[i][j] = v;
            next[j][i] = v;
        }
    }
    next
}

fn derivative_step(prev: &KernelMatrix) -> KernelMatrix {
    let n = prev.len();
    let mut next = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = relu_derivative_expectation(prev[i][i], prev[j][j], prev[i][j]);
            next[i][j] = v;
            next[j][i] = v;
        }
    }
    next
}

fn first_layer(x: &[f64], n: usize, d: usize) -> KernelMatrix {
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut dot = 0.0;
            for c in 0..d {
                dot += x[i * d + c] * x[j * d + c];
            }
            let v = dot / d as f64 + 1.0;
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    sigma
}

/// Layer covariances `S^(1..L)` of a plain relu network over inputs
/// `x [n, d]`; `layers` counts weight layers.
pub fn nn_kernel_analytic(x: &[f64], n: usize, d: usize, layers: usize) -> Result<Vec<KernelMatrix>> {
    if x.len() != n * d {
        return Err(Error::DimensionMismatch {
            context: "nn_kernel_analytic inputs".into(),
            expected: n * d,
            got: x.len(),
        });
    }
    if layers == 0 {
        return Err(Error::InvalidParameter("need at least one layer".into()));
    }
    let mut out = vec![first_layer(x, n, d)];
    for _ in 1..layers {
        let next = gaussian_layer_step(out.last().unwrap());
        out.push(next);
    }
    Ok(out)
}

/// Temporal layer covariances: plain layers up to `compose_at`, the Schur
/// product with `kt` at the composition layer, then the Gaussian recursion
/// over the composed kernels.
pub fn temporal_layer_kernels(
    x: &[f64],
    n: usize,
    d: usize,
    kt: &KernelMatrix,
    compose_at: usize,
    layers: usize,
) -> Result<Vec<KernelMatrix>> {
    if compose_at == 0 || compose_at > layers {
        return Err(Error::InvalidParameter(format!(
            "compose_at must be in 1..={layers}"
        )));
    }
    let plain = nn_kernel_analytic(x, n, d, compose_at)?;
    let mut out = plain[..compose_at - 1].to_vec();
    out.push(compose_kernel(&plain[compose_at - 1], kt)?);
    for _ in compose_at..layers {
        let next = gaussian_layer_step(out.last().unwrap());
        out.push(next);
    }
    Ok(out)
}

/// The analytic temporal tangent kernel and its ingredients.
#[derive(Debug, Clone)]
pub struct TemporalNtk {
    /// `S_T^(1..L)`.
    pub layer_kernels: Vec<KernelMatrix>,
    /// `dS_T^(h)` for `h = 2..L` (index `h-2`).
    pub derivative_kernels: Vec<KernelMatrix>,
    /// `Theta_T^(L)`.
    pub ntk: KernelMatrix,
}

/// Full tangent-kernel recursion for a relu network with a temporal
/// composition at `compose_at`.
pub fn ntk_temporal_analytic(
    x: &[f64],
    n: usize,
    d: usize,
    kt: &KernelMatrix,
    compose_at: usize,
    layers: usize,
) -> Result<TemporalNtk> {
    let layer_kernels = temporal_layer_kernels(x, n, d, kt, compose_at, layers)?;
    let mut derivative_kernels = Vec::new();
    let mut theta = layer_kernels[0].clone();
    for h in 1..layers {
        let dot_sigma = derivative_step(&layer_kernels[h - 1]);
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = theta[i][j] * dot_sigma[i][j] + layer_kernels[h][i][j];
            }
        }
        derivative_kernels.push(dot_sigma);
        theta = next;
    }
    Ok(TemporalNtk {
        layer_kernels,
        derivative_kernels,
        ntk: theta,
    })
}

/// Standard (composition-free) tangent kernel, written as its own
/// straight-line recursion so the reduction `K_T = 1` has an independent
/// reference.
pub fn standard_ntk_analytic(x: &[f64], n: usize, d: usize, layers: usize) -> Result<KernelMatrix> {
    let sigmas = nn_kernel_analytic(x, n, d, layers)?;
    let mut theta = sigmas[0].clone();
    for h in 1..layers {
        let dot_sigma = derivative_step(&sigmas[h - 1]);
        for i in 0..n {
            for j in 0..n {
                theta[i][j] = theta[i][j] * dot_sigma[i][j] + sigmas[h][i][j];
            }
        }
    }
    Ok(theta)
}
