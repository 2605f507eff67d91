//! Input covariance design by iterative water-filling against the deterministic-equivalent rate.

use num_complex::Complex64;

use crate::channel::ScenarioSpec;
use crate::det_equiv::{shannon_from, solve_model, Model, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitize, real_diagonal, CMat};

/// Powers `p_i = max(0, μ − 1/g_i)` with `Σ p_i = budget`.
///
/// The water level is found exactly from the active set rather than by bisection. Equal
/// gains yield exactly `budget / n` per mode.
pub fn waterfill_allocation(gains: &[f64], budget: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::InvalidParameter("water-filling needs at least one gain".into()));
    }
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter(format!("gains must be positive and finite, got {g}")));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidParameter(format!("budget must be positive, got {budget}")));
    }
    let inverse: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| inverse[a].total_cmp(&inverse[b]));

    // Largest active set whose weakest member still lies below the water level.
    let (mut active, mut level_offset) = (1, inverse[order[0]]);
    let mut mean = 0.0;
    for (j, &i) in order.iter().enumerate() {
        mean += (inverse[i] - mean) / (j + 1) as f64;
        let share = budget / (j + 1) as f64;
        if share + mean > inverse[i] {
            active = j + 1;
            level_offset = mean;
        } else {
            break;
        }
    }
    let share = budget / active as f64;
    let mut powers = vec![0.0; gains.len()];
    for &i in &order[..active] {
        powers[i] = (share + (level_offset - inverse[i])).max(0.0);
    }
    Ok(powers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceOptions {
    /// Stop once the rate improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverOptions,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSolution {
    /// `Q_k`, sharing the eigenbasis of `T_k`, with `tr Q_k = n_k`.
    pub q: Vec<CMat>,
    /// Eigenvalues of `T_k`, ascending.
    pub t_eigenvalues: Vec<Vec<f64>>,
    /// Power on each eigenmode of `T_k`, in the same order.
    pub powers: Vec<Vec<f64>>,
    /// Deterministic-equivalent rate at the returned `Q_k`, nats per receive antenna.
    pub rate: f64,
    pub iterations: usize,
    /// Rate before the first update and after every iteration.
    pub rate_trajectory: Vec<f64>,
}

/// Tolerated rate decrease between outer iterations before declaring oscillation.
const MONOTONE_SLACK: f64 = 1e-12;

struct Basis {
    values: Vec<f64>,
    vectors: CMat,
}

impl Basis {
    fn matrix(&self, weights: &[f64]) -> CMat {
        let first = weights[0];
        if weights.iter().all(|&w| w == first) && self.values.iter().all(|&v| v == self.values[0]) {
            // Scalar multiple of the identity.
            return CMat::identity(weights.len(), weights.len()) * Complex64::new(first * self.values[0], 0.0);
        }
        let d: Vec<f64> = self.values.iter().zip(weights).map(|(v, w)| v * w).collect();
        hermitize(&(&self.vectors * real_diagonal(&d) * self.vectors.adjoint()))
    }

    fn covariance(&self, powers: &[f64]) -> CMat {
        if powers.iter().all(|&p| p == powers[0]) {
            return CMat::identity(powers.len(), powers.len()) * Complex64::new(powers[0], 0.0);
        }
        hermitize(&(&self.vectors * real_diagonal(powers) * self.vectors.adjoint()))
    }
}

/// Rate and per-user `e_k(−σ²)` with transmit matrices `T_k^{1/2} Q_k T_k^{1/2}`.
fn evaluate(
    spec: &ScenarioSpec,
    bases: &[Basis],
    powers: &[Vec<f64>],
    sigma2: f64,
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>)> {
    let mut effective = spec.clone();
    for ((user, basis), p) in effective.users.iter_mut().zip(bases).zip(powers) {
        user.t = basis.matrix(p);
    }
    let model = Model::new(&effective)?;
    let result = solve_model(&model, Complex64::new(-sigma2, 0.0), opts, None)?;
    let rate = shannon_from(&model, &result, sigma2)?;
    Ok((rate, result.state.e.iter().map(|e| e.re).collect()))
}

/// Iterative water-filling: at the current fixed point, user `k` water-fills its budget
/// `n_k` over the eigenmodes of `T_k` with gains `β_k e_k(−σ²) λ_j(T_k)`.
pub fn optimize_covariance(
    spec: &ScenarioSpec,
    sigma2: f64,
    opts: &CovarianceOptions,
) -> Result<CovarianceSolution> {
    if spec.has_los() || spec.has_interference() {
        return Err(Error::InvalidParameter(
            "covariance optimization requires Hbar = 0 and S = 0".into(),
        ));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")));
    }
    spec.validate()?;
    let bases: Vec<Basis> = spec
        .users
        .iter()
        .map(|u| {
            let (values, vectors) = hermitian_eigen(&u.t);
            Basis {
                values: values.into_iter().map(|v| v.max(0.0)).collect(),
                vectors,
            }
        })
        .collect();
    let mut powers: Vec<Vec<f64>> = spec.users.iter().map(|u| vec![1.0; u.n]).collect();
    let (mut rate, mut e) = evaluate(spec, &bases, &powers, sigma2, &opts.solver)?;
    let mut trajectory = vec![rate];
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::Optimization(format!(
                "water-filling did not settle within {} iterations (last change {:.3e})",
                opts.max_iter,
                trajectory[trajectory.len() - 1] - trajectory[trajectory.len() - 2]
            )));
        }
        iterations += 1;
        let next: Vec<Vec<f64>> = bases
            .iter()
            .enumerate()
            .map(|(k, basis)| waterfill_modes(basis, spec.beta(k) * e[k], spec.users[k].n as f64))
            .collect::<Result<_>>()?;
        let (next_rate, next_e) = evaluate(spec, &bases, &next, sigma2, &opts.solver)?;
        if next_rate < rate - MONOTONE_SLACK * rate.abs().max(1.0) {
            return Err(Error::Optimization(format!(
                "rate decreased from {rate} to {next_rate} at iteration {iterations}"
            )));
        }
        trajectory.push(next_rate);
        let improvement = next_rate - rate;
        powers = next;
        rate = next_rate;
        e = next_e;
        if improvement < opts.tol {
            break;
        }
    }
    Ok(CovarianceSolution {
        q: bases.iter().zip(&powers).map(|(b, p)| b.covariance(p)).collect(),
        t_eigenvalues: bases.iter().map(|b| b.values.clone()).collect(),
        powers,
        rate,
        iterations,
        rate_trajectory: trajectory,
    })
}

/// Water-fills over the modes with positive eigenvalue; null modes get no power.
fn waterfill_modes(basis: &Basis, scale: f64, budget: f64) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..basis.values.len()).filter(|&j| basis.values[j] > 0.0).collect();
    let gains: Vec<f64> = live.iter().map(|&j| scale * basis.values[j]).collect();
    let allocation = waterfill_allocation(&gains, budget)?;
    let mut powers = vec![0.0; basis.values.len()];
    for (&j, p) in live.iter().zip(allocation) {
        powers[j] = p;
    }
    Ok(powers)
}
