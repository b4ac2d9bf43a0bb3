//! Named verification checks with pinned thresholds. The CLI `verify`
//! command and the acceptance suite both run these; every tolerance lives
//! here as a constant.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::kernel::{phi_stationary, KernelMatrix};
use crate::spectral::FlowSpectral;
use crate::util::{median, parallel_map_indexed, quadrature, rng_from_seed};

use super::{
    empirical_composed_covariance, empirical_ntk, misspec_deviations, ntk_temporal_analytic,
    standard_ntk_analytic, EmpiricalNet,
};

/// One CSV row of a verification report.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub check: String,
    /// Width, sample count or other size axis of the measurement.
    pub size: f64,
    pub seed: u64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    fn detail(&mut self, line: String) {
        self.details.push(line);
    }

    fn require(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.details
            .push(format!("[{}] {line}", if ok { "pass" } else { "FAIL" }));
    }
}

fn new_report(name: &'static str) -> CheckReport {
    CheckReport {
        name,
        passed: true,
        details: Vec::new(),
        rows: Vec::new(),
    }
}

// --- random-feature convergence -------------------------------------------

pub const RFF_M_VALUES: [usize; 3] = [256, 1024, 4096];
pub const RFF_SEEDS: u64 = 20;
pub const RFF_GRID: usize = 50;
pub const RFF_GRID_MAX: f64 = 5.0;
pub const RFF_RATE_FACTOR: f64 = 0.6;
pub const RFF_ABS_TOL: f64 = 0.03;

/// Monte Carlo convergence of the stationary feature map against the
/// closed-form Gaussian kernel `exp(-dt^2/2)`: the quadrupling rate and the
/// absolute tolerance at the largest sample count.
pub fn check_rff(jobs: usize) -> CheckReport {
    let mut report = new_report("rff");
    let sup_error = |m: usize, seed: u64| -> f64 {
        let mut rng = rng_from_seed(seed);
        let freqs: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let base_t = 0.0;
        let phi0 = phi_stationary(base_t, &freqs);
        let mut sup = 0.0f64;
        for g in 1..=RFF_GRID {
            let dt = RFF_GRID_MAX * g as f64 / RFF_GRID as f64;
            let phi1 = phi_stationary(base_t + dt, &freqs);
            let k: f64 = phi0.iter().zip(&phi1).map(|(a, b)| a * b).sum();
            let want = (-dt * dt / 2.0).exp();
            sup = sup.max((k - want).abs());
        }
        sup
    };
    let mut medians = Vec::new();
    for &m in &RFF_M_VALUES {
        let errs = parallel_map_indexed(jobs, RFF_SEEDS as usize, |s| {
            sup_error(m, 1000 + s as u64)
        });
        for (s, e) in errs.iter().enumerate() {
            report.rows.push(CheckRow {
                check: "rff_sup_error".into(),
                size: m as f64,
                seed: 1000 + s as u64,
                error: *e,
            });
        }
        let mut errs = errs;
        medians.push(median(&mut errs));
    }
    report.detail(format!(
        "median sup errors: m=256 {:.4}, m=1024 {:.4}, m=4096 {:.4}",
        medians[0], medians[1], medians[2]
    ));
    report.require(
        medians[1] <= RFF_RATE_FACTOR * medians[0],
        format!(
            "err(1024) = {:.4} <= {RFF_RATE_FACTOR} * err(256) = {:.4}",
            medians[1],
            RFF_RATE_FACTOR * medians[0]
        ),
    );
    report.require(
        medians[2] <= RFF_RATE_FACTOR * medians[1],
        format!(
            "err(4096) = {:.4} <= {RFF_RATE_FACTOR} * err(1024) = {:.4}",
            medians[2],
            RFF_RATE_FACTOR * medians[1]
        ),
    );
    report.require(
        medians[2] <= RFF_ABS_TOL,
        format!("err(4096) = {:.4} <= {RFF_ABS_TOL}", medians[2]),
    );
    report
}

// --- flow bijectivity and density ------------------------------------------

pub const FLOW_ROUND_TRIP_SAMPLES: usize = 1000;
pub const FLOW_ROUND_TRIP_TOL: f64 = 1e-9;
pub const FLOW_LOG_DET_TOL: f64 = 1e-5;
pub const FLOW_QUADRATURE_TOL: f64 = 1e-3;

/// Determinant by Gaussian elimination with partial pivoting; the Jacobians
/// here are at most 4x4.
fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    det
}

/// Bijectivity and density of the coupling flow: exact round trips, the
/// analytic log-determinant against a numerically differentiated Jacobian,
/// and unit mass of the 1-d density by quadrature.
pub fn check_flow(_jobs: usize) -> CheckReport {
    let mut report = new_report("flow");

    // randomized 4-d flow
    let dim = 4;
    let flow = FlowSpectral::new(dim, 4, 16, "spectral/flow");
    let mut store = ParamStore::new();
    flow.register(&mut store, &mut rng_from_seed(2024));
    let mut rng = rng_from_seed(2025);
    for (_, entry) in store.iter_mut() {
        for v in entry.values.iter_mut() {
            *v += 0.4 * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let n = FLOW_ROUND_TRIP_SAMPLES;
    let eps: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    let (x, _) = flow.forward_values(&store, &eps, n).expect("forward");
    let (eps_back, _) = flow.inverse_values(&store, &x, n).expect("inverse");
    let round_trip = eps
        .iter()
        .zip(&eps_back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    report.rows.push(CheckRow {
        check: "flow_round_trip".into(),
        size: n as f64,
        seed: 2025,
        error: round_trip,
    });
    report.require(
        round_trip <= FLOW_ROUND_TRIP_TOL,
        format!("round-trip max error {round_trip:.2e} <= {FLOW_ROUND_TRIP_TOL:.0e}"),
    );

    // log-det against a numeric Jacobian at a handful of points
    let mut max_ld_err = 0.0f64;
    for trial in 0..5 {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, ld) = flow.forward_values(&store, &z, 1).expect("forward");
        let h = 1e-6;
        let mut jac = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            let mut zp = z.clone();
            zp[j] += h;
            let (up, _) = flow.forward_values(&store, &zp, 1).expect("forward");
            zp[j] = z[j] - h;
            let (dn, _) = flow.forward_values(&store, &zp, 1).expect("forward");
            for i in 0..dim {
                jac[i][j] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        let num_ld = determinant(jac).abs().ln();
        let err = (ld[0] - num_ld).abs();
        max_ld_err = max_ld_err.max(err);
        report.rows.push(CheckRow {
            check: "flow_log_det".into(),
            size: trial as f64,
            seed: 2025,
            error: err,
        });
    }
    report.require(
        max_ld_err <= FLOW_LOG_DET_TOL,
        format!("log-det vs numeric Jacobian {max_ld_err:.2e} <= {FLOW_LOG_DET_TOL:.0e}"),
    );

    // 1-d density integrates to one
    let flow1 = FlowSpectral::new(1, 4, 16, "spectral/flow1");
    let mut store1 = ParamStore::new();
    flow1.register(&mut store1, &mut rng_from_seed(2026));
    store1.values_mut("spectral/flow1/affine/log_scale").unwrap()[0] = 0.3;
    store1.values_mut("spectral/flow1/affine/shift").unwrap()[0] = 0.5;
    let mass = quadrature(
        |x| flow1.log_density(&store1, &[x], 1).expect("density")[0].exp(),
        -10.0,
        10.0,
        4001,
    );
    report.rows.push(CheckRow {
        check: "flow_quadrature".into(),
        size: 4001.0,
        seed: 2026,
        error: (mass - 1.0).abs(),
    });
    report.require(
        (mass - 1.0).abs() <= FLOW_QUADRATURE_TOL,
        format!("1-d density mass {mass:.6} within {FLOW_QUADRATURE_TOL} of 1"),
    );
    report
}

// --- GP limit ---------------------------------------------------------------

pub const GP_WIDTHS: [usize; 3] = [256, 1024, 4096];
pub const GP_DRAWS: usize = 200;
pub const GP_SEEDS: u64 = 10;
pub const GP_INPUTS: usize = 6;
pub const GP_REL_TOL: f64 = 0.05;
pub const GP_FEATURES: usize = 16;

fn gp_test_inputs() -> (Vec<f64>, Vec<f64>, usize) {
    // fixed, moderately spread inputs in d = 2 with times in [0, 1]
    let x = vec![
        0.8, 0.4, //
        0.5, -0.6, //
        -0.3, 0.9, //
        1.1, 0.2, //
        -0.7, -0.5, //
        0.1, 1.0,
    ];
    let times = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    (x, times, 2)
}

/// Convergence of the empirical composed-hidden covariance to
/// `S^(1) .* K_T` as width grows.
pub fn check_gp(jobs: usize) -> CheckReport {
    let mut report = new_report("gp");
    let (x, times, d) = gp_test_inputs();
    let n = GP_INPUTS;

    let error_for = |width: usize, seed: u64| -> f64 {
        let fm = crate::kernel::FeatureMap::new(
            crate::kernel::FeatureMode::Nonstationary,
            GP_FEATURES,
            d + 1,
            crate::util::derive_seed(seed, 71),
        );
        let (emp, kt) =
            empirical_composed_covariance(&x, &times, n, d, width, &fm, GP_DRAWS, seed)
                .expect("empirical covariance");
        let analytic = analytic_composed(&x, n, d, &kt);
        max_rel_error(&emp, &analytic)
    };

    let mut medians = Vec::new();
    for &width in &GP_WIDTHS {
        let errs = parallel_map_indexed(jobs, GP_SEEDS as usize, |s| {
            error_for(width, 3000 + s as u64)
        });
        for (s, e) in errs.iter().enumerate() {
            report.rows.push(CheckRow {
                check: "gp_rel_error".into(),
                size: width as f64,
                seed: 3000 + s as u64,
                error: *e,
            });
        }
        let mut errs = errs;
        medians.push(median(&mut errs));
    }
    report.detail(format!(
        "median max-relative errors: w=256 {:.4}, w=1024 {:.4}, w=4096 {:.4}",
        medians[0], medians[1], medians[2]
    ));
    report.require(
        medians[0] > medians[1] && medians[1] > medians[2],
        format!(
            "errors decrease monotonically in width ({:.4} > {:.4} > {:.4})",
            medians[0], medians[1], medians[2]
        ),
    );
    report.require(
        medians[2] <= GP_REL_TOL,
        format!("error at width 4096 = {:.4} <= {GP_REL_TOL}", medians[2]),
    );
    report
}

fn analytic_composed(x: &[f64], n: usize, d: usize, kt: &KernelMatrix) -> KernelMatrix {
    let sigma1 = super::nn_kernel_analytic(x, n, d, 1).expect("sigma1");
    crate::kernel::compose_kernel(&sigma1[0], kt).expect("compose")
}

fn max_rel_error(got: &KernelMatrix, want: &KernelMatrix) -> f64 {
    let n = got.len();
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let denom = want[i][j].abs().max(1e-12);
            max = max.max((got[i][j] - want[i][j]).abs() / denom);
        }
    }
    max
}

// --- temporal NTK ------------------------------------------------------------

pub const NTK_WIDTH: usize = 1024;
pub const NTK_SEEDS: u64 = 10;
pub const NTK_FEATURES: usize = 16;
pub const NTK_REL_TOL: f64 = 0.10;
pub const NTK_REDUCTION_TOL: f64 = 1e-12;

fn ntk_test_inputs() -> (Vec<f64>, Vec<f64>, usize) {
    let x = vec![
        0.9, 0.3, //
        0.4, -0.5, //
        -0.2, 0.8, //
        0.7, 0.6,
    ];
    let times = vec![0.0, 0.15, 0.3, 0.45];
    (x, times, 2)
}

fn diag_normalize(m: &KernelMatrix) -> KernelMatrix {
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = m[i][j] / (m[i][i] * m[j][j]).sqrt();
        }
    }
    out
}

/// Empirical tangent kernel at width 1024 against the analytic recursion
/// (compared as correlation matrices), plus the exact reduction to the
/// standard tangent kernel when the temporal Gram is all ones.
pub fn check_ntk(jobs: usize) -> CheckReport {
    let mut report = new_report("ntk");
    let (x, times, d) = ntk_test_inputs();
    let n = times.len();

    let error_for = |seed: u64| -> f64 {
        let net = EmpiricalNet::new(d, NTK_WIDTH, NTK_FEATURES, crate::util::derive_seed(seed, 72));
        let mut store = ParamStore::new();
        net.register(&mut store, &mut rng_from_seed(seed));
        let emp = empirical_ntk(&net, &mut store, &x, &times, n).expect("empirical ntk");
        let kt = super::empirical::feature_gram(&net, &x, &times, n).expect("gram");
        let analytic = ntk_temporal_analytic(&x, n, d, &kt, 1, 2).expect("analytic").ntk;
        let (en, an) = (diag_normalize(&emp), diag_normalize(&analytic));
        let mut max = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                max = max.max((en[i][j] - an[i][j]).abs() / an[i][j].abs().max(1e-12));
            }
        }
        max
    };

    let errs = parallel_map_indexed(jobs, NTK_SEEDS as usize, |s| error_for(4000 + s as u64));
    for (s, e) in errs.iter().enumerate() {
        report.rows.push(CheckRow {
            check: "ntk_rel_error".into(),
            size: NTK_WIDTH as f64,
            seed: 4000 + s as u64,
            error: *e,
        });
    }
    let mut errs = errs;
    let med = median(&mut errs);
    report.require(
        med <= NTK_REL_TOL,
        format!("median entrywise error {med:.4} <= {NTK_REL_TOL} at width {NTK_WIDTH}"),
    );

    // exact reduction: all-ones temporal Gram leaves the standard kernel
    let ones = vec![vec![1.0; n]; n];
    let reduced = ntk_temporal_analytic(&x, n, d, &ones, 1, 3).expect("reduced").ntk;
    let standard = standard_ntk_analytic(&x, n, d, 3).expect("standard");
    let mut gap = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            gap = gap.max((reduced[i][j] - standard[i][j]).abs());
        }
    }
    report.rows.push(CheckRow {
        check: "ntk_reduction_gap".into(),
        size: n as f64,
        seed: 0,
        error: gap,
    });
    report.require(
        gap <= NTK_REDUCTION_TOL,
        format!("K_T = 1 reduction gap {gap:.2e} <= {NTK_REDUCTION_TOL:.0e}"),
    );
    report
}

// --- misspecification robustness ----------------------------------------------

pub const MISSPEC_DELTAS: [f64; 3] = [0.1, 1.0, 4.0];
pub const MISSPEC_NS: [usize; 3] = [64, 256, 1024];
pub const MISSPEC_N_REF: usize = 16384;
pub const MISSPEC_BLOCKS: usize = 8;
pub const MISSPEC_SEEDS: u64 = 20;
pub const MISSPEC_FEATURES: usize = 64;
pub const MISSPEC_DATA_DIM: usize = 1;

/// Estimator deviation shrinks with the sample count at every divergence
/// budget, and grows across budgets no faster than `sqrt(delta + 1)`.
pub fn check_misspec(jobs: usize) -> CheckReport {
    let mut report = new_report("misspec");
    // medians[delta_idx][n_idx]
    let mut medians = vec![vec![0.0; MISSPEC_NS.len()]; MISSPEC_DELTAS.len()];
    for (di, &delta) in MISSPEC_DELTAS.iter().enumerate() {
        let devs = parallel_map_indexed(jobs, MISSPEC_SEEDS as usize, |s| {
            misspec_deviations(
                delta,
                &MISSPEC_NS,
                MISSPEC_N_REF,
                MISSPEC_DATA_DIM,
                MISSPEC_FEATURES,
                MISSPEC_BLOCKS,
                5000 + s as u64,
            )
            .expect("misspec deviations")
        });
        for (ni, &n) in MISSPEC_NS.iter().enumerate() {
            let mut col: Vec<f64> = devs.iter().map(|row| row[ni]).collect();
            for (s, row) in devs.iter().enumerate() {
                report.rows.push(CheckRow {
                    check: format!("misspec_dev_delta_{delta}"),
                    size: n as f64,
                    seed: 5000 + s as u64,
                    error: row[ni],
                });
            }
            medians[di][ni] = median(&mut col);
        }
        report.detail(format!(
            "delta {delta}: median deviations {:?}",
            medians[di]
                .iter()
                .map(|v| format!("{v:.5}"))
                .collect::<Vec<_>>()
        ));
    }
    for (di, &delta) in MISSPEC_DELTAS.iter().enumerate() {
        let m = &medians[di];
        report.require(
            m[0] > m[1] && m[1] > m[2],
            format!(
                "delta {delta}: deviation decreases with n ({:.5} > {:.5} > {:.5})",
                m[0], m[1], m[2]
            ),
        );
    }
    for ni in 0..MISSPEC_NS.len() {
        for di in 0..MISSPEC_DELTAS.len() {
            for dj in di + 1..MISSPEC_DELTAS.len() {
                let (da, db) = (MISSPEC_DELTAS[di], MISSPEC_DELTAS[dj]);
                let bound = ((db + 1.0) / (da + 1.0)).sqrt();
                let ratio = medians[dj][ni] / medians[di][ni];
                report.require(
                    ratio <= bound,
                    format!(
                        "n={}: dev({db})/dev({da}) = {ratio:.3} <= sqrt(({db}+1)/({da}+1)) = {bound:.3}",
                        MISSPEC_NS[ni]
                    ),
                );
            }
        }
    }
    report
}

/// Run the named check set: `gp`, `ntk`, `rff`, `flow`, `misspec` or `all`.
pub fn run_checks(which: &str, jobs: usize) -> Result<Vec<CheckReport>> {
    let all = ["rff", "flow", "gp", "ntk", "misspec"];
    let selected: Vec<&str> = if which == "all" {
        all.to_vec()
    } else if all.contains(&which) {
        vec![which]
    } else {
        return Err(Error::InvalidParameter(format!(
            "unknown check `{which}`; expected one of rff, flow, gp, ntk, misspec, all"
        )));
    };
    Ok(selected
        .into_iter()
        .map(|name| match name {
            "rff" => check_rff(jobs),
            "flow" => check_flow(jobs),
            "gp" => check_gp(jobs),
            "ntk" => check_ntk(jobs),
            "misspec" => check_misspec(jobs),
            _ => unreachable!(),
        })
        .collect())
}
