//! Deterministic equivalent of the per-antenna ergodic mutual information.

use num_complex::Complex64;

use super::moments::first_moment;
use super::solver::{solve_model, DetEquivResult, Model, SolverOptions};
use crate::channel::ScenarioSpec;
use crate::error::{Error, Result};
use crate::linalg::{logdet_hpd, CMat};
use crate::quadrature::{integrate, QuadratureOptions};

fn require_no_interference(spec: &ScenarioSpec) -> Result<()> {
    if spec.has_interference() {
        return Err(Error::InvalidParameter(
            "the closed-form Shannon transform requires S = 0".into(),
        ));
    }
    Ok(())
}

fn require_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise variance must be positive and finite, got {sigma2}"
        )))
    }
}

/// Scales the solver tolerance with the `1/|z|` magnitude of the solution.
pub(crate) fn scaled_options(opts: &SolverOptions, z: Complex64) -> SolverOptions {
    opts.with_tol(opts.tol / z.norm().max(1.0))
}

/// Closed-form value at a converged solve `result` at `z = −σ²`:
/// `(1/N) logdet(Φ⁻¹/σ² + H̄Φ̃H̄ᴴ) + (1/N) logdet(Φ̃⁻¹/σ²) − σ² Σ e_i ẽ_i`.
pub(crate) fn shannon_from(model: &Model, result: &DetEquivResult, sigma2: f64) -> Result<f64> {
    result.require_converged()?;
    let n = model.n_rx as f64;
    let e: Vec<f64> = result.state.e.iter().map(|x| x.re).collect();
    let et: Vec<f64> = result.state.e_tilde.iter().map(|x| x.re).collect();

    // Φ(−σ²)⁻¹/σ² = I + Σ ẽ_i R_i (S = 0).
    let mut receive = CMat::identity(model.n_rx, model.n_rx);
    for (r, &x) in model.r.iter().zip(&et) {
        receive += r * Complex64::new(x, 0.0);
    }
    if model.has_los {
        let h = &model.hbar_stacked;
        receive += h * result.phi_tilde() * h.adjoint();
    }
    let mut value = logdet_hpd(&receive, "Phi^-1/sigma2 + Hbar Phi~ Hbar^H")?;

    // Φ̃_k(−σ²)⁻¹/σ² = I + β_k e_k T_k.
    for k in 0..model.k() {
        let nk = model.dims[k];
        let block = CMat::identity(nk, nk) + &model.t[k] * Complex64::new(model.betas[k] * e[k], 0.0);
        value += logdet_hpd(&block, "I + beta e T")?;
    }
    let coupling: f64 = e.iter().zip(&et).map(|(a, b)| a * b).sum();
    Ok(value / n - sigma2 * coupling)
}

/// Deterministic equivalent `𝒱_N(σ²)` of `E{(1/N) logdet(I + HHᴴ/σ²)}`, in nats.
pub fn det_shannon(spec: &ScenarioSpec, sigma2: f64, opts: &SolverOptions) -> Result<f64> {
    require_no_interference(spec)?;
    require_sigma2(sigma2)?;
    let model = Model::new(spec)?;
    let result = solve_model(&model, Complex64::new(-sigma2, 0.0), opts, None)?;
    shannon_from(&model, &result, sigma2)
}

/// `(1/N) tr Ψ(−σ²) − 1/σ²`, the σ²-derivative of `𝒱_N`.
pub fn shannon_derivative(spec: &ScenarioSpec, sigma2: f64, opts: &SolverOptions) -> Result<f64> {
    require_sigma2(sigma2)?;
    let z = Complex64::new(-sigma2, 0.0);
    let result = solve_model(&Model::new(spec)?, z, &scaled_options(opts, z), None)?;
    result.require_converged()?;
    Ok(result.stieltjes.re - 1.0 / sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    pub quadrature: QuadratureOptions,
    pub solver: SolverOptions,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadratureOptions {
                abs_tol: 1e-9,
                rel_tol: 1e-9,
                max_intervals: 200,
            },
            solver: SolverOptions::default(),
        }
    }
}

/// `∫_{σ²}^{∞} (1/ω − (1/N) tr Ψ(−ω)) dω` by adaptive quadrature in `log ω`, truncated at
/// `ω_max = max(10⁴, 100·M₁)` with the tail `M₁/ω_max` added, `M₁` the first spectral moment.
pub fn shannon_via_integral(spec: &ScenarioSpec, sigma2: f64, opts: &IntegralOptions) -> Result<f64> {
    require_no_interference(spec)?;
    require_sigma2(sigma2)?;
    let model = Model::new(spec)?;
    let m1 = first_moment(spec);
    let omega_max = (100.0 * m1).max(1e4);
    if sigma2 >= omega_max {
        return Ok(m1 / sigma2);
    }
    let mut warm: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let integrand = |u: f64| -> Result<f64> {
        let omega = u.exp();
        let z = Complex64::new(-omega, 0.0);
        let init = warm.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
        let result = solve_model(&model, z, &scaled_options(&opts.solver, z), init)?;
        result.require_converged()?;
        warm = Some((result.state.e.clone(), result.state.e_tilde.clone()));
        Ok(1.0 - omega * result.stieltjes.re)
    };
    let body = integrate(integrand, sigma2.ln(), omega_max.ln(), opts.quadrature)?;
    Ok(body + m1 / omega_max)
}
