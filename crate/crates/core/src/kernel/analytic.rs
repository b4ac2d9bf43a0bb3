//! Closed-form reference kernels and spectral densities.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::KernelMatrix;

/// Coefficients of the second-order system
/// `f'' + a0 f' + a1 f = b0 eps(t)` driven by white noise of spectral
/// level `p0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ctar2Params {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub p0: f64,
}

impl Ctar2Params {
    pub fn new(a0: f64, a1: f64, b0: f64, p0: f64) -> Result<Self> {
        let p = Ctar2Params { a0, a1, b0, p0 };
        p.validate()?;
        Ok(p)
    }

    /// Stability of the second-order system requires positive damping and
    /// stiffness; a zero gain or noise level makes the process degenerate.
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ctar2 requires a0 > 0 and a1 > 0, got a0={}, a1={}",
                self.a0, self.a1
            )));
        }
        if self.b0 == 0.0 {
            return Err(Error::InvalidParameter("ctar2 requires b0 != 0".into()));
        }
        if !(self.p0 > 0.0) {
            return Err(Error::InvalidParameter("ctar2 requires p0 > 0".into()));
        }
        Ok(())
    }
}

/// Spectral density of the CTAR(2) process:
/// `s(w) = p0 b0^2 / ((a1 - w^2)^2 + a0^2 w^2)`.
pub fn ctar2_sdf(p: &Ctar2Params, omega: f64) -> f64 {
    let w2 = omega * omega;
    p.p0 * p.b0 * p.b0 / ((p.a1 - w2) * (p.a1 - w2) + p.a0 * p.a0 * w2)
}

/// Folded spectral density of the discretization `f[i] = f(i*a)`, truncated
/// to `|k| <= k_max`:
/// `s_a(w) = (1/a) * sum_k s((w + 2 pi k) / a)`, `w` in `(-pi, pi]`.
/// The tail decays like `w^-4`, so the default truncation `k_max = 128`
/// leaves an error below 1e-8 at `a = 1`.
pub fn aliased_sdf(p: &Ctar2Params, interval: f64, omega: f64, k_max: i64) -> f64 {
    assert!(interval > 0.0, "sampling interval must be positive");
    assert!(k_max >= 0);
    let mut total = 0.0;
    for k in -k_max..=k_max {
        total += ctar2_sdf(p, (omega + 2.0 * PI * k as f64) / interval);
    }
    total / interval
}

/// Matérn kernel with smoothness fixed at 3/2: `amplitude` is the marginal
/// standard deviation, `length_scale` the characteristic time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matern32Params {
    pub amplitude: f64,
    pub length_scale: f64,
}

impl Matern32Params {
    pub fn new(amplitude: f64, length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "matern-3/2 requires length_scale > 0".into(),
            ));
        }
        Ok(Matern32Params {
            amplitude,
            length_scale,
        })
    }
}

/// `k(dt) = amp^2 (1 + sqrt(3)|dt|/ls) exp(-sqrt(3)|dt|/ls)`.
pub fn matern32_kernel(p: &Matern32Params, dt: f64) -> f64 {
    let r = 3f64.sqrt() * dt.abs() / p.length_scale;
    p.amplitude * p.amplitude * (1.0 + r) * (-r).exp()
}

/// Spectral density of the Matérn-3/2 kernel, normalized so that its
/// inverse Fourier transform at lag 0 equals `amplitude^2`:
/// `s(w) = c * (3/ls^2 + w^2)^{-2}` with `c = 4 amp^2 (3/ls^2)^{3/2} / ... `
/// fixed by `k(0) = (1/2pi) \int s`.
pub fn matern32_sdf(p: &Matern32Params, omega: f64) -> f64 {
    let a1 = 3.0 / (p.length_scale * p.length_scale);
    // \int (a1 + w^2)^{-2} dw = pi / (2 a1^{3/2})
    let c = p.amplitude * p.amplitude * 4.0 * a1.powf(1.5);
    c / ((a1 + omega * omega) * (a1 + omega * omega))
}

/// The CTAR(2) system whose stationary solution has the Matérn-3/2 kernel:
/// `a0 = 2 sqrt(3)/ls`, `a1 = 3/ls^2`, with `b0` scaled so the marginal
/// variance equals `amplitude^2` at `p0 = 1`.
pub fn matern32_ctar2(p: &Matern32Params) -> Ctar2Params {
    let a1 = 3.0 / (p.length_scale * p.length_scale);
    let a0 = 2.0 * 3f64.sqrt() / p.length_scale;
    // k(0) = p0 b0^2 / (4 a1^{3/2}) for the critically damped case
    let b0 = 2.0 * p.amplitude * a1.powf(0.75);
    Ctar2Params {
        a0,
        a1,
        b0,
        p0: 1.0,
    }
}

/// Schur (elementwise) product of two symmetric kernel matrices. PSD-ness of
/// the result follows from the Schur product theorem.
pub fn compose_kernel(sigma: &KernelMatrix, kt: &KernelMatrix) -> Result<KernelMatrix> {
    let n = sigma.len();
    if kt.len() != n {
        return Err(Error::DimensionMismatch {
            context: "compose_kernel matrix sizes".into(),
            expected: n,
            got: kt.len(),
        });
    }
    for (name, m) in [("sigma", sigma), ("kt", kt)] {
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("compose_kernel {name} row {i}"),
                    expected: n,
                    got: row.len(),
                });
            }
            for j in 0..i {
                let (a, b) = (m[i][j], m[j][i]);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "compose_kernel: {name} is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| sigma[i][j] * kt[i][j]).collect())
        .collect())
}
