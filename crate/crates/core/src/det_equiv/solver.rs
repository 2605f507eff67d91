//! Damped Picard solver for the coupled `e_i(z)`, `ẽ_i(z)` fixed-point system.

use num_complex::Complex64;

use crate::channel::ScenarioSpec;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, inverse, inverse_hpd, trace, trace_product, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on `max|Δe| + max|Δẽ|` for the undamped update.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial Picard damping in `(0, 1]`.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

const MIN_DAMPING: f64 = 1.0 / 16.0;
const PATIENCE: usize = 5;

/// Solution vectors of the fixed-point system at one `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointState {
    pub z: Complex64,
    pub e: Vec<Complex64>,
    pub e_tilde: Vec<Complex64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The matrices `Ψ, Ψ̃, Φ, Φ̃` evaluated at a fixed-point state.
#[derive(Debug, Clone, PartialEq)]
pub struct DetEquivResult {
    pub state: FixedPointState,
    /// `Ψ(z)`, `N × N`.
    pub psi: CMat,
    /// `Ψ̃(z)`, `n × n`.
    pub psi_tilde: CMat,
    /// `Φ(z)`, `N × N`.
    pub phi: CMat,
    /// Diagonal blocks `Φ̃_k(z) = −(1/z)(I + β_k e_k T_k)⁻¹`.
    pub phi_tilde_blocks: Vec<CMat>,
    /// `(1/N) tr Ψ(z)`.
    pub stieltjes: Complex64,
}

impl DetEquivResult {
    /// Dense block-diagonal `Φ̃(z)`.
    pub fn phi_tilde(&self) -> CMat {
        crate::linalg::block_diag(&self.phi_tilde_blocks)
    }

    /// Fails unless the underlying solve converged.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.state.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.state.iterations,
                residual: self.state.residual,
            })
        }
    }
}

/// Scenario data pre-arranged for repeated fixed-point evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub n_rx: usize,
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    pub betas: Vec<f64>,
    pub r: Vec<CMat>,
    pub t: Vec<CMat>,
    t_eig: Vec<(Vec<f64>, CMat)>,
    pub hbar: Vec<CMat>,
    pub hbar_stacked: CMat,
    pub s: CMat,
    pub has_los: bool,
}

impl Model {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            n_rx: spec.n_rx,
            dims: spec.users.iter().map(|u| u.n).collect(),
            offsets: (0..spec.num_users()).map(|k| spec.offset(k)).collect(),
            betas: (0..spec.num_users()).map(|k| spec.beta(k)).collect(),
            r: spec.users.iter().map(|u| u.r.clone()).collect(),
            t: spec.users.iter().map(|u| u.t.clone()).collect(),
            t_eig: spec.users.iter().map(|u| hermitian_eigen(&u.t)).collect(),
            hbar: spec.users.iter().map(|u| u.hbar.clone()).collect(),
            hbar_stacked: spec.hbar_stacked(),
            s: spec.s.clone(),
            has_los: spec.has_los(),
        })
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn n_total(&self) -> usize {
        self.dims.iter().sum()
    }

    /// `U f(λ) Uᴴ` for the eigen-decomposition of `T_k`.
    fn t_function(&self, k: usize, f: impl Fn(f64) -> Complex64) -> CMat {
        let (values, vectors) = &self.t_eig[k];
        let mut scaled = vectors.clone();
        for (j, &lam) in values.iter().enumerate() {
            let w = f(lam);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= w;
            }
        }
        scaled * vectors.adjoint()
    }

    /// `Φ(z)⁻¹ = S − z Σ ẽ_i R_i − z I`.
    fn phi_inverse(&self, z: Complex64, e_tilde: &[Complex64]) -> CMat {
        let mut m = &self.s - CMat::identity(self.n_rx, self.n_rx) * z;
        for (r, &et) in self.r.iter().zip(e_tilde) {
            m -= r * (z * et);
        }
        m
    }

    /// Evaluates all matrices at `(e, ẽ)`.
    pub fn evaluate(&self, z: Complex64, e: &[Complex64], e_tilde: &[Complex64]) -> Result<Matrices> {
        let minus_inv_z = -z.inv();
        // On the negative real axis every matrix inverted below is Hermitian positive definite.
        let hpd = z.im == 0.0;
        let invert = |m: &CMat, what: &str| {
            if hpd {
                inverse_hpd(m, what)
            } else {
                inverse(m, what)
            }
        };
        let phi_inv = self.phi_inverse(z, e_tilde);
        let phi = invert(&phi_inv, "Phi(z)")?;
        let phi_tilde_blocks: Vec<CMat> = (0..self.k())
            .map(|k| {
                let be = self.betas[k] * e[k];
                self.t_function(k, |lam| minus_inv_z / (Complex64::new(1.0, 0.0) + be * lam))
            })
            .collect();
        let (psi, psi_tilde) = if self.has_los {
            let h = &self.hbar_stacked;
            let phi_tilde = crate::linalg::block_diag(&phi_tilde_blocks);
            let psi = invert(&(&phi_inv - h * &phi_tilde * h.adjoint() * z), "Psi(z)")?;
            let blocks_inv: Vec<CMat> = (0..self.k())
                .map(|k| {
                    let be = self.betas[k] * e[k];
                    self.t_function(k, |lam| -z * (Complex64::new(1.0, 0.0) + be * lam))
                })
                .collect();
            let phi_tilde_inv = crate::linalg::block_diag(&blocks_inv);
            let psi_tilde = invert(
                &(phi_tilde_inv - h.adjoint() * &phi * h * z),
                "Psi_tilde(z)",
            )?;
            (psi, psi_tilde)
        } else {
            (phi.clone(), crate::linalg::block_diag(&phi_tilde_blocks))
        };
        Ok(Matrices {
            phi,
            phi_tilde_blocks,
            psi,
            psi_tilde,
        })
    }

    /// Right-hand side of the fixed-point equations.
    pub fn update(&self, m: &Matrices) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n_rx as f64;
        let e = self
            .r
            .iter()
            .map(|r| trace_product(r, &m.psi) / n)
            .collect();
        let e_tilde = (0..self.k())
            .map(|k| {
                let (o, nk) = (self.offsets[k], self.dims[k]);
                let block = m.psi_tilde.view((o, o), (nk, nk)).clone_owned();
                trace_product(&self.t[k], &block) / nk as f64
            })
            .collect();
        (e, e_tilde)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Matrices {
    pub phi: CMat,
    pub phi_tilde_blocks: Vec<CMat>,
    pub psi: CMat,
    pub psi_tilde: CMat,
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub(crate) fn check_z(z: Complex64) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("z = {z} is not finite")));
    }
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "z = {z} lies on the non-negative real axis"
        )));
    }
    Ok(())
}

pub(crate) fn solve_model(
    model: &Model,
    z: Complex64,
    opts: &SolverOptions,
    initial: Option<(&[Complex64], &[Complex64])>,
) -> Result<DetEquivResult> {
    check_z(z)?;
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "invalid solver options {opts:?}"
        )));
    }
    let k = model.k();
    let (mut e, mut e_tilde) = match initial {
        Some((e0, et0)) if e0.len() == k && et0.len() == k => (e0.to_vec(), et0.to_vec()),
        _ => {
            let start = -z.inv();
            (vec![start; k], vec![start; k])
        }
    };
    let mut damping = opts.damping;
    let mut residual = f64::INFINITY;
    let mut rising = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut matrices = model.evaluate(z, &e, &e_tilde)?;
    while iterations < opts.max_iter {
        let (mut e_new, mut et_new) = model.update(&matrices);
        if z.im == 0.0 {
            // Real on the negative axis; drop round-off imaginary parts.
            e_new.iter_mut().chain(et_new.iter_mut()).for_each(|x| x.im = 0.0);
        }
        let r = max_abs_diff(&e_new, &e) + max_abs_diff(&et_new, &e_tilde);
        if !r.is_finite() {
            return Err(Error::Singular(format!("fixed-point update at z = {z}")));
        }
        if r <= opts.tol {
            residual = r;
            converged = true;
            break;
        }
        if r > residual {
            rising += 1;
            if rising >= PATIENCE {
                damping = (damping * 0.5).max(MIN_DAMPING);
                rising = 0;
            }
        } else {
            rising = 0;
        }
        residual = r;
        for (x, y) in e.iter_mut().zip(&e_new) {
            *x += (y - *x) * damping;
        }
        for (x, y) in e_tilde.iter_mut().zip(&et_new) {
            *x += (y - *x) * damping;
        }
        iterations += 1;
        matrices = model.evaluate(z, &e, &e_tilde)?;
    }
    let stieltjes = trace(&matrices.psi) / model.n_rx as f64;
    Ok(DetEquivResult {
        state: FixedPointState {
            z,
            e,
            e_tilde,
            residual,
            iterations,
            converged,
        },
        psi: matrices.psi,
        psi_tilde: matrices.psi_tilde,
        phi: matrices.phi,
        phi_tilde_blocks: matrices.phi_tilde_blocks,
        stieltjes,
    })
}

/// Solves the fixed-point system at `z ∉ ℝ⁺`.
///
/// Non-convergence is reported through `state.converged == false`; a singular
/// intermediate matrix is an error.
pub fn solve_fixed_point(spec: &ScenarioSpec, z: Complex64, opts: &SolverOptions) -> Result<DetEquivResult> {
    solve_model(&Model::new(spec)?, z, opts, None)
}

/// Deterministic equivalent `(1/N) tr Ψ(z)` of the Stieltjes transform of `B_N`.
pub fn det_stieltjes(spec: &ScenarioSpec, z: Complex64, opts: &SolverOptions) -> Result<Complex64> {
    let result = solve_fixed_point(spec, z, opts)?;
    result.require_converged()?;
    Ok(result.stieltjes)
}
