//! Spatial correlation of a half-wavelength uniform linear array under a Gaussian
//! power azimuth spectrum.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::quadrature::{gauss_hermite, gaussian_expectation, integrate, QuadratureOptions};

/// Gauss–Hermite orders tried in turn; two successive ones must agree.
const ORDERS: [usize; 3] = [64, 128, 256];
const AGREEMENT: f64 = 1e-9;
/// Half-width of the adaptive fallback window, in standard deviations.
const WINDOW: f64 = 12.0;

fn rule(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; 3] = [const { OnceLock::new() }; 3];
    RULES[level].get_or_init(|| gauss_hermite(ORDERS[level]))
}

#[derive(Default, Clone, Copy)]
struct Acc(Complex64);

impl std::ops::Add for Acc {
    type Output = Acc;
    fn add(self, rhs: Acc) -> Acc {
        Acc(self.0 + rhs.0)
    }
}

impl std::ops::Mul<f64> for Acc {
    type Output = Acc;
    fn mul(self, rhs: f64) -> Acc {
        Acc(self.0 * rhs)
    }
}

fn lag_correlation(level: usize, lag: f64, mean: f64, spread: f64) -> Complex64 {
    let (x, w) = rule(level);
    gaussian_expectation(x, w, mean, spread, |theta| {
        Acc(Complex64::from_polar(1.0, std::f64::consts::PI * lag * theta.sin()))
    })
    .0
}

/// The finer of the first two successive orders that agree; adaptive Gauss–Kronrod over
/// `mean ± 12·spread` when the rules disagree.
fn resolve_lag(lag: f64, mean: f64, spread: f64) -> Result<Complex64> {
    let mut previous = lag_correlation(0, lag, mean, spread);
    for level in 1..ORDERS.len() {
        let next = lag_correlation(level, lag, mean, spread);
        if (next - previous).norm() <= AGREEMENT {
            return Ok(next);
        }
        previous = next;
    }
    let opts = QuadratureOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let norm = 1.0 / (spread * (2.0 * std::f64::consts::PI).sqrt());
    let density = move |t: f64| norm * (-0.5 * ((t - mean) / spread).powi(2)).exp();
    let phase = move |t: f64| std::f64::consts::PI * lag * t.sin();
    let (a, b) = (mean - WINDOW * spread, mean + WINDOW * spread);
    let re = integrate(|t| Ok(density(t) * phase(t).cos()), a, b, opts)?;
    let im = integrate(|t| Ok(density(t) * phase(t).sin()), a, b, opts)?;
    Ok(Complex64::new(re, im))
}

/// `n × n` Hermitian Toeplitz correlation, entry `(p, q) = E_θ{exp(jπ(p−q) sin θ)}` with
/// `θ ~ Normal(mean_angle, rms_spread)` (angles in degrees), normalized to trace `n`.
pub fn ula_correlation(n: usize, mean_angle_deg: f64, rms_spread_deg: f64) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidParameter("array size must be positive".into()));
    }
    if !(rms_spread_deg >= 0.0 && rms_spread_deg.is_finite() && mean_angle_deg.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "angles must be finite with non-negative spread, got mean {mean_angle_deg}, spread {rms_spread_deg}"
        )));
    }
    let mean = mean_angle_deg.to_radians();
    let spread = rms_spread_deg.to_radians();
    let mut lags = Vec::with_capacity(n);
    for d in 0..n {
        let lag = d as f64;
        let value = if spread == 0.0 {
            Complex64::from_polar(1.0, std::f64::consts::PI * lag * mean.sin())
        } else {
            resolve_lag(lag, mean, spread).map_err(|e| {
                Error::Quadrature(format!(
                    "ULA correlation at lag {d}, rms spread {rms_spread_deg}°, {n} elements: {e}"
                ))
            })?
        };
        lags.push(value);
    }
    let mut out = CMat::from_fn(n, n, |p, q| {
        if p >= q {
            lags[p - q]
        } else {
            lags[q - p].conj()
        }
    });
    let tr: f64 = out.diagonal().iter().map(|z| z.re).sum();
    out *= Complex64::new(n as f64 / tr, 0.0);
    for i in 0..n {
        out[(i, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(out)
}
