//! Numerical verification of the kernel theory the architecture rests on:
//! infinite-width layer covariances, the composed temporal variants, the
//! temporal tangent-kernel recursion, random-feature convergence rates, and
//! robustness of the spectral estimator under bounded misspecification.

mod checks;
mod empirical;
mod misspec;
mod nnk;

pub use checks::{
    check_flow, check_gp, check_misspec, check_ntk, check_rff, run_checks, CheckReport, CheckRow,
};
pub use empirical::{empirical_composed_covariance, empirical_ntk, feature_gram, EmpiricalNet};
pub use misspec::{chi_squared_diag_gaussians, misspec_deviations, GaussianPerturbation};
pub use nnk::{
    nn_kernel_analytic, ntk_temporal_analytic, relu_derivative_expectation, relu_expectation,
    standard_ntk_analytic, temporal_layer_kernels, TemporalNtk,
};
