//! Fading laws for the i.i.d. core entries `W·exp(jθ)`, with unit mean power `E{W²} = 1`.

use num_complex::Complex64;
use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Amplitude law of the fading entries. The phase is always uniform on `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FadingSpec {
    /// Rayleigh amplitude, i.e. circularly-symmetric complex Gaussian entries.
    #[default]
    #[serde(rename = "gaussian")]
    ComplexGaussian,
    /// Nakagami-m amplitude, `W = √(G/m)` with `G ~ Gamma(m, 1)`.
    Nakagami { m: f64 },
    /// Log-normal amplitude, `W = exp(μ + σZ)` with `μ = −σ²`.
    #[serde(rename = "lognormal")]
    LogNormal { sigma: f64 },
}

impl FadingSpec {
    pub fn nakagami(m: f64) -> Result<Self> {
        let spec = FadingSpec::Nakagami { m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lognormal(sigma: f64) -> Result<Self> {
        let spec = FadingSpec::LogNormal { sigma };
        spec.validate()?;
        Ok(spec)
    }

    /// Log-normal law whose amplitude coefficient of variation equals `cv`.
    pub fn lognormal_with_cv(cv: f64) -> Result<Self> {
        if !(cv > 0.0 && cv.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "log-normal CV must be positive and finite, got {cv}"
            )));
        }
        Self::lognormal((1.0 + cv * cv).ln().sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingSpec::ComplexGaussian => Ok(()),
            FadingSpec::Nakagami { m } => {
                // m = ∞ is the constant-amplitude limit.
                if m > 0.5 && !m.is_nan() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "Nakagami m-factor must exceed 0.5, got {m}"
                    )))
                }
            }
            FadingSpec::LogNormal { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "log-normal sigma must be positive and finite, got {sigma}"
                    )))
                }
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            FadingSpec::ComplexGaussian => "gaussian",
            FadingSpec::Nakagami { .. } => "nakagami",
            FadingSpec::LogNormal { .. } => "lognormal",
        }
    }

    /// Short label used in file names and tables, e.g. `lognormal-sigma0.8326`.
    pub fn label(&self) -> String {
        match *self {
            FadingSpec::ComplexGaussian => "gaussian".to_string(),
            FadingSpec::Nakagami { m } => format!("nakagami-m{m}"),
            FadingSpec::LogNormal { sigma } => format!("lognormal-sigma{sigma:.6}"),
        }
    }

    /// `E{W}` under the unit-power parameterization.
    pub fn mean_amplitude(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            FadingSpec::ComplexGaussian => std::f64::consts::PI.sqrt() / 2.0,
            FadingSpec::Nakagami { m } if m.is_infinite() => 1.0,
            FadingSpec::Nakagami { m } => (ln_gamma(m + 0.5) - ln_gamma(m)).exp() / m.sqrt(),
            FadingSpec::LogNormal { sigma } => (-0.5 * sigma * sigma).exp(),
        })
    }

    /// Draws one amplitude `W`.
    pub fn sample_amplitude<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FadingSpec::ComplexGaussian => {
                let u: f64 = Open01.sample(rng);
                (-u.ln()).sqrt()
            }
            FadingSpec::Nakagami { m } if m.is_infinite() => 1.0,
            FadingSpec::Nakagami { m } => {
                let g = Gamma::new(m, 1.0 / m).expect("validated shape");
                g.sample(rng).sqrt()
            }
            FadingSpec::LogNormal { sigma } => {
                let u: f64 = Open01.sample(rng);
                let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
                (sigma * z - sigma * sigma).exp()
            }
        }
    }
}

/// Coefficient of variation `√var{W} / E{W}` of the fading amplitude, from closed-form moments.
pub fn cv_of(spec: &FadingSpec) -> Result<f64> {
    if let FadingSpec::LogNormal { sigma } = *spec {
        spec.validate()?;
        return Ok((sigma * sigma).exp_m1().sqrt());
    }
    let mean = spec.mean_amplitude()?;
    Ok((1.0 / (mean * mean) - 1.0).max(0.0).sqrt())
}

fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut phase = ChaCha8Rng::seed_from_u64(seed);
    phase.set_stream(0);
    let mut amplitude = ChaCha8Rng::seed_from_u64(seed);
    amplitude.set_stream(1);
    (phase, amplitude)
}

/// Samples a `rows × cols` matrix with i.i.d. entries `W·exp(jθ)/√cols`.
///
/// Phases and amplitudes come from separate streams of the same seed, so two
/// laws sampled with one seed share their phases exactly. Gaussian and
/// log-normal amplitudes are inverse-CDF transforms of the same uniforms.
pub fn sample_fading(spec: &FadingSpec, rows: usize, cols: usize, seed: u64) -> Result<CMat> {
    spec.validate()?;
    if cols == 0 {
        return Err(Error::Dimension("fading matrix needs at least one column".into()));
    }
    let (mut phase_rng, mut amp_rng) = streams(seed);
    let scale = 1.0 / (cols as f64).sqrt();
    let mut out = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let theta = phase_rng.gen::<f64>() * std::f64::consts::TAU;
            let w = spec.sample_amplitude(&mut amp_rng);
            out[(i, j)] = Complex64::from_polar(w * scale, theta);
        }
    }
    Ok(out)
}

/// `count` amplitudes drawn with the amplitude stream `sample_fading` would use.
pub fn sample_amplitudes(spec: &FadingSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let (_, mut amp_rng) = streams(seed);
    Ok((0..count).map(|_| spec.sample_amplitude(&mut amp_rng)).collect())
}
