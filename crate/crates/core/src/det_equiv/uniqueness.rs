//! The nonnegative `4K × 4K` matrix `Γ` whose spectral radius below one certifies that
//! a fixed-point solution is the unique one.

use nalgebra::DMatrix;

use super::solver::{DetEquivResult, Model};
use crate::channel::ScenarioSpec;
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, trace_product, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessDiagnostic {
    pub gamma: DMatrix<f64>,
    pub spectral_radius: f64,
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

impl UniquenessDiagnostic {
    /// `min_i min(1 − u_{2,ii}, 1 − v_{2,ii})`.
    pub fn min_margin(&self) -> f64 {
        let k = self.u2.nrows();
        (0..k)
            .map(|i| (1.0 - self.u2[(i, i)]).min(1.0 - self.v2[(i, i)]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `tr(A M B Mᴴ)` for Hermitian `A`, `B`.
fn sandwich(a: &CMat, m: &CMat, b: &CMat) -> f64 {
    trace_product(&(a * m), &(b * m.adjoint())).re
}

pub(crate) struct Coefficients {
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

/// `u_{1,ij}, u_{2,ij}, v_{1,ij}, v_{2,ij}`. The `v` coefficients are normalized by the
/// dimension `n_i` of the row user, matching `ẽ_i = (1/n_i) tr(T_i ⟨Ψ̃⟩_i)`.
pub(crate) fn coefficients(model: &Model, result: &DetEquivResult) -> Coefficients {
    let k = model.k();
    let n = model.n_rx as f64;
    let z = result.state.z;
    let psi = &result.psi;
    let psi_t = &result.psi_tilde;
    let phi_z = &result.phi * z;
    let n_total = model.n_total();

    // Block-embedded T̲_i.
    let t_embedded: Vec<CMat> = (0..k)
        .map(|i| {
            let mut m = CMat::zeros(n_total, n_total);
            let (o, ni) = (model.offsets[i], model.dims[i]);
            m.view_mut((o, o), (ni, ni)).copy_from(&model.t[i]);
            m
        })
        .collect();

    let mut u1 = DMatrix::zeros(k, k);
    let mut u2 = DMatrix::zeros(k, k);
    let mut v1 = DMatrix::zeros(k, k);
    let mut v2 = DMatrix::zeros(k, k);
    for j in 0..k {
        let beta = model.betas[j];
        // H̄_j Φ̃_{zj} T_j Φ̃_{zj}ᴴ H̄_jᴴ and H̄ᴴ Φ_z R_j Φ_zᴴ H̄.
        let (los_rx, los_tx) = if model.has_los {
            let pz = &result.phi_tilde_blocks[j] * z;
            let hj = &model.hbar[j];
            let rx = hj * &pz * &model.t[j] * pz.adjoint() * hj.adjoint();
            let h = &model.hbar_stacked;
            let tx = h.adjoint() * &phi_z * &model.r[j] * phi_z.adjoint() * h;
            (Some(rx), Some(tx))
        } else {
            (None, None)
        };
        for i in 0..k {
            let ni = model.dims[i] as f64;
            u1[(i, j)] = sandwich(&model.r[i], psi, &model.r[j]) / n;
            v1[(i, j)] = beta * sandwich(&t_embedded[i], psi_t, &t_embedded[j]) / ni;
            if let (Some(rx), Some(tx)) = (&los_rx, &los_tx) {
                u2[(i, j)] = beta * sandwich(&model.r[i], psi, rx) / n;
                v2[(i, j)] = sandwich(&t_embedded[i], psi_t, tx) / ni;
            }
        }
    }
    Coefficients { u1, u2, v1, v2 }
}

/// Builds `Γ` from a converged solve and returns it with its spectral radius.
pub fn uniqueness_diagnostic(spec: &ScenarioSpec, result: &DetEquivResult) -> Result<UniquenessDiagnostic> {
    result.require_converged()?;
    let model = Model::new(spec)?;
    let Coefficients { u1, u2, v1, v2 } = coefficients(&model, result);
    let k = model.k();
    let z2 = result.state.z.norm_sqr();

    let mut g11 = DMatrix::zeros(k, k);
    let mut g12 = DMatrix::zeros(k, k);
    let mut g21 = DMatrix::zeros(k, k);
    let mut g22 = DMatrix::zeros(k, k);
    for i in 0..k {
        let du = 1.0 - u2[(i, i)];
        let dv = 1.0 - v2[(i, i)];
        if !(du > 0.0 && dv > 0.0) {
            return Err(Error::InvalidSolution(format!(
                "user {i}: 1 - u2 = {du:.3e}, 1 - v2 = {dv:.3e} must both be positive"
            )));
        }
        for j in 0..k {
            if i != j {
                g11[(i, j)] = u2[(i, j)] / du;
                g22[(i, j)] = v2[(i, j)] / dv;
            }
            g12[(i, j)] = u1[(i, j)] / du;
            g21[(i, j)] = v1[(i, j)] / dv;
        }
    }

    let mut gamma = DMatrix::zeros(4 * k, 4 * k);
    let mut put = |row: usize, col: usize, block: &DMatrix<f64>, scale: f64| {
        gamma
            .view_mut((row * k, col * k), (k, k))
            .copy_from(&(block * scale));
    };
    put(0, 0, &g11, 1.0);
    put(0, 3, &g12, 1.0);
    put(1, 1, &g11, 1.0);
    put(1, 2, &g12, z2);
    put(2, 1, &g21, 1.0);
    put(2, 2, &g22, 1.0);
    put(3, 0, &g21, z2);
    put(3, 3, &g22, 1.0);

    if gamma.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidSolution(
            "Gamma has negative or non-finite entries".into(),
        ));
    }
    let rho = spectral_radius(&gamma);
    Ok(UniquenessDiagnostic {
        gamma,
        spectral_radius: rho,
        u1,
        u2,
        v1,
        v2,
    })
}
