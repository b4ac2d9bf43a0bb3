//! Euler–Maruyama integration of the CTAR(2) system
//! `f'' + a0 f' + a1 f = b0 eps(t)` as the first-order pair
//! `x' = v`, `v' = -a1 x - a0 v + b0 xi`, plus spectral estimation helpers
//! for verifying the simulated paths against the analytic densities.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::kernel::Ctar2Params;
use crate::util::rng_from_seed;

/// Dense path of `steps + 1` values starting from rest at zero, driven by
/// unit normal increments from `seed`. The fine grid is returned so that
/// irregular subsampling is exact up to `fine_dt` resolution.
pub fn simulate_ctar2(p: &Ctar2Params, fine_dt: f64, steps: usize, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..steps).map(|_| rng.sample(StandardNormal)).collect();
    simulate_ctar2_with_noise(p, fine_dt, &noise)
}

/// Same integration driven by caller-provided unit normals (one per step).
/// Lets tests couple two resolutions through common random numbers.
pub fn simulate_ctar2_with_noise(p: &Ctar2Params, fine_dt: f64, noise: &[f64]) -> Result<Vec<f64>> {
    Ok(simulate_ctar2_state_with_noise(p, fine_dt, noise)?.0)
}

/// Full-state variant returning `(x, x')` on the fine grid.
pub fn simulate_ctar2_state(
    p: &Ctar2Params,
    fine_dt: f64,
    steps: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..steps).map(|_| rng.sample(StandardNormal)).collect();
    simulate_ctar2_state_with_noise(p, fine_dt, &noise)
}

fn simulate_ctar2_state_with_noise(
    p: &Ctar2Params,
    fine_dt: f64,
    noise: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    assert!(fine_dt > 0.0, "fine_dt must be positive");
    let mut xs = Vec::with_capacity(noise.len() + 1);
    let mut vs = Vec::with_capacity(noise.len() + 1);
    let mut x = 0.0f64;
    let mut v = 0.0f64;
    let noise_scale = p.b0 * (p.p0 * fine_dt).sqrt();
    xs.push(x);
    vs.push(v);
    for xi in noise {
        let new_x = x + v * fine_dt;
        let new_v = v + (-p.a1 * x - p.a0 * v) * fine_dt + noise_scale * xi;
        x = new_x;
        v = new_v;
        xs.push(x);
        vs.push(v);
    }
    Ok((xs, vs))
}

/// Stream the integration and keep only every `every`-th point after a
/// burn-in, avoiding a dense path allocation for long-horizon runs.
pub fn simulate_ctar2_subsampled(
    p: &Ctar2Params,
    fine_dt: f64,
    every: usize,
    count: usize,
    burn_in_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    p.validate()?;
    assert!(every >= 1);
    let mut rng = rng_from_seed(seed);
    let mut x = 0.0f64;
    let mut v = 0.0f64;
    let noise_scale = p.b0 * (p.p0 * fine_dt).sqrt();
    let step = |x: &mut f64, v: &mut f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let xi: f64 = rng.sample(StandardNormal);
        let new_x = *x + *v * fine_dt;
        let new_v = *v + (-p.a1 * *x - p.a0 * *v) * fine_dt + noise_scale * xi;
        *x = new_x;
        *v = new_v;
    };
    for _ in 0..burn_in_steps {
        step(&mut x, &mut v, &mut rng);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..every {
            step(&mut x, &mut v, &mut rng);
        }
        out.push(x);
    }
    Ok(out)
}

/// Biased empirical autocovariance at lags `0..=max_lag`.
pub fn empirical_autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    assert!(max_lag < n);
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|lag| {
            let mut s = 0.0;
            for t in 0..n - lag {
                s += (x[t] - mean) * (x[t + lag] - mean);
            }
            s / n as f64
        })
        .collect()
}

/// Welch power spectral density estimate with a Hann window and 50% overlap.
/// Returns `(omega, p(omega))` on the grid `omega_k = 2 pi k / segment`,
/// `k = 1 .. segment/2`, normalized so that `E[p(omega)]` estimates the
/// discrete-time spectral density `sum_n k[n] e^{-i omega n}`.
pub fn periodogram_welch(x: &[f64], segment: usize) -> (Vec<f64>, Vec<f64>) {
    use rustfft::{num_complex::Complex64, FftPlanner};

    assert!(segment >= 8 && segment % 2 == 0);
    assert!(x.len() >= segment);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let window: Vec<f64> = (0..segment)
        .map(|n| {
            let phase = std::f64::consts::PI * n as f64 / segment as f64;
            phase.sin() * phase.sin()
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let hop = segment / 2;
    let n_segments = (x.len() - segment) / hop + 1;
    let half = segment / 2;
    let mut power = vec![0.0; half];
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment);
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    for s in 0..n_segments {
        let base = s * hop;
        for n in 0..segment {
            buf[n] = Complex64::new((x[base + n] - mean) * window[n], 0.0);
        }
        fft.process(&mut buf);
        for k in 1..=half {
            power[k - 1] += buf[k].norm_sqr() / window_power;
        }
    }
    let omegas = (1..=half)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / segment as f64)
        .collect();
    let scale = 1.0 / n_segments as f64;
    (omegas, power.into_iter().map(|p| p * scale).collect())
}
