//! Temporal kernels: random Fourier feature maps (stationary and
//! non-stationary), kernel composition, and the analytic CTAR(2) /
//! Matérn-3/2 reference kernels with their spectral densities, including the
//! folded (aliased) density of a regularly discretized process.

mod analytic;
mod features;

pub use analytic::{
    aliased_sdf, compose_kernel, ctar2_sdf, matern32_ctar2, matern32_kernel, matern32_sdf,
    Ctar2Params, Matern32Params,
};
pub use features::{
    gram_from_rows, phi_nonstationary, phi_stationary, FeatureMap, FeatureMode,
};

/// Dense symmetric kernel matrix, row-major square.
pub type KernelMatrix = Vec<Vec<f64>>;
