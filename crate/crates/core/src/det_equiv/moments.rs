use num_complex::Complex64;

use super::shannon::scaled_options;
use super::solver::{solve_fixed_point, SolverOptions};
use crate::channel::ScenarioSpec;
use crate::error::Result;
use crate::linalg::{frobenius_sq, trace};

/// Imaginary evaluation point `j·z₂` of the first-moment probe.
pub const PROBE_HEIGHT: f64 = 1e4;

/// Two routes to the first moment `∫ λ dF_N(λ)` of the limiting spectral distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentIdentity {
    /// `(1/N) Σ_k tr(T_k) tr(R_k)/n_k + (1/N) Σ_k tr(H̄_k H̄_kᴴ)`.
    pub trace_formula: f64,
    /// `Re{−j z₂ (j z₂ (1/N) tr Ψ(j z₂) + 1)}` at `z₂ = PROBE_HEIGHT`.
    pub probe: f64,
}

/// First moment from the trace formula; equals `K` (no LOS) or `2K` (LOS everywhere) when normalized.
pub fn first_moment(spec: &ScenarioSpec) -> f64 {
    let n = spec.n_rx as f64;
    spec.users
        .iter()
        .map(|u| trace(&u.t).re * trace(&u.r).re / u.n as f64 + frobenius_sq(&u.hbar))
        .sum::<f64>()
        / n
}

pub fn moment_identity(spec: &ScenarioSpec, opts: &SolverOptions) -> Result<MomentIdentity> {
    let z = Complex64::new(0.0, PROBE_HEIGHT);
    let result = solve_fixed_point(spec, z, &scaled_options(opts, z))?;
    result.require_converged()?;
    let inner = z * result.stieltjes + 1.0;
    let probe = (-z * inner).re;
    Ok(MomentIdentity {
        trace_formula: first_moment(spec),
        probe,
    })
}
