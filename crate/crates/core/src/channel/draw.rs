use super::fading::{sample_fading, FadingSpec};
use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, hermitize, psd_sqrt, trace, CMat};
use crate::seed;

/// One realization of the channel and of `B_N = S + H Hᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// Per-user fading cores `X_k`, entries already scaled by `1/√n_k`.
    pub cores: Vec<CMat>,
    /// Per-user channels `H_k = R_k^{1/2} X_k T_k^{1/2} + H̄_k`.
    pub h_users: Vec<CMat>,
    /// Stacked channel `H = [H_1 ⋯ H_K]`.
    pub h: CMat,
    pub s: CMat,
    pub b: CMat,
}

/// Precomputed square roots of a scenario, for repeated sampling.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    n_rx: usize,
    dims: Vec<usize>,
    r_sqrt: Vec<CMat>,
    t_sqrt: Vec<CMat>,
    hbar: Vec<CMat>,
    fading: Vec<FadingSpec>,
    s: CMat,
}

impl ChannelSampler {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            n_rx: spec.n_rx,
            dims: spec.users.iter().map(|u| u.n).collect(),
            r_sqrt: spec.users.iter().map(|u| psd_sqrt(&u.r)).collect(),
            t_sqrt: spec.users.iter().map(|u| psd_sqrt(&u.t)).collect(),
            hbar: spec.users.iter().map(|u| u.hbar.clone()).collect(),
            fading: spec.users.iter().map(|u| u.fading).collect(),
            s: spec.s.clone(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.dims.len()
    }

    /// Draw with the scenario's own fading laws.
    pub fn draw(&self, seed: u64) -> Result<ChannelDraw> {
        self.draw_with(seed, &self.fading)
    }

    /// Draw with every user's fading replaced by `fading[k]`; user `k` always uses the
    /// stream `derive(seed, k)`, so draws under different laws are paired.
    pub fn draw_with(&self, seed: u64, fading: &[FadingSpec]) -> Result<ChannelDraw> {
        if fading.len() != self.num_users() {
            return Err(Error::Dimension("one fading law per user required".into()));
        }
        let cores = self
            .dims
            .iter()
            .zip(fading)
            .enumerate()
            .map(|(k, (&nk, f))| sample_fading(f, self.n_rx, nk, seed::derive(seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        self.from_cores(cores)
    }

    /// Assembles a draw from explicit fading cores.
    pub fn from_cores(&self, cores: Vec<CMat>) -> Result<ChannelDraw> {
        if cores.len() != self.num_users() {
            return Err(Error::Dimension("one fading core per user required".into()));
        }
        let n_total: usize = self.dims.iter().sum();
        let mut h = CMat::zeros(self.n_rx, n_total);
        let mut h_users = Vec::with_capacity(cores.len());
        let mut col = 0;
        for (k, x) in cores.iter().enumerate() {
            let nk = self.dims[k];
            if x.shape() != (self.n_rx, nk) {
                return Err(Error::Dimension(format!(
                    "core {k} must be {}x{nk}, got {:?}",
                    self.n_rx,
                    x.shape()
                )));
            }
            let hk = &self.r_sqrt[k] * x * &self.t_sqrt[k] + &self.hbar[k];
            h.view_mut((0, col), (self.n_rx, nk)).copy_from(&hk);
            col += nk;
            h_users.push(hk);
        }
        let b = hermitize(&(&self.s + &h * h.adjoint()));
        Ok(ChannelDraw {
            cores,
            h_users,
            h,
            s: self.s.clone(),
            b,
        })
    }
}

/// Samples one channel realization; a pure function of `(spec, seed)`.
pub fn assemble_channel(spec: &ScenarioSpec, seed: u64) -> Result<ChannelDraw> {
    ChannelSampler::new(spec)?.draw(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCheck {
    /// Mean of `tr(H_k H_kᴴ)` over the trials.
    pub empirical: f64,
    /// `tr(R_k) tr(T_k) / n_k + tr(H̄_k H̄_kᴴ)`.
    pub analytic: f64,
}

/// Per-user empirical channel power against its analytic value.
pub fn power_check(spec: &ScenarioSpec, trials: usize, seed: u64) -> Result<Vec<PowerCheck>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("power_check needs at least one trial".into()));
    }
    let sampler = ChannelSampler::new(spec)?;
    let mut sums = vec![0.0; spec.num_users()];
    for t in 0..trials {
        let draw = sampler.draw(seed::derive(seed, t as u64))?;
        for (acc, hk) in sums.iter_mut().zip(&draw.h_users) {
            *acc += frobenius_sq(hk);
        }
    }
    Ok(spec
        .users
        .iter()
        .zip(sums)
        .map(|(u, sum)| PowerCheck {
            empirical: sum / trials as f64,
            analytic: trace(&u.r).re * trace(&u.t).re / u.n as f64 + frobenius_sq(&u.hbar),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::channel::scenario::{MatrixSource, ScenarioRecipe};
    use crate::linalg::{hermitian_asymmetry, hermitian_eigenvalues};

    fn recipe(n: usize, los: bool) -> ScenarioRecipe {
        serde_json::from_value(serde_json::json!({
            "N": n,
            "users": [
                {"R": "random_diagonal", "T": {"ula": {"mean_deg": 10, "spread_deg": 15}}, "los": los},
                {"n": n / 2, "R": "random_diagonal", "los": los}
            ],
            "seed": 5
        }))
        .unwrap()
    }

    #[test]
    fn zero_cores_leave_deterministic_part() {
        let mut spec = recipe(4, true).build().unwrap();
        spec.s = CMat::identity(4, 4) * Complex64::new(0.5, 0.0);
        let sampler = ChannelSampler::new(&spec).unwrap();
        let cores = spec.users.iter().map(|u| CMat::zeros(4, u.n)).collect();
        let draw = sampler.from_cores(cores).unwrap();
        let hbar = spec.hbar_stacked();
        let expected = &spec.s + &hbar * hbar.adjoint();
        assert!(frobenius_sq(&(draw.b - expected)).sqrt() < 1e-13);
    }

    #[test]
    fn scalar_channel_is_squared_magnitude() {
        let raw = crate::channel::scenario::RawScenario {
            n_rx: 1,
            users: vec![crate::channel::scenario::RawUser {
                n: 1,
                r: MatrixSource::Identity,
                t: MatrixSource::Identity,
                hbar: Default::default(),
                fading: None,
            }],
            s: None,
        };
        let spec = crate::channel::build_scenario(&raw, FadingSpec::ComplexGaussian, 0).unwrap();
        let draw = assemble_channel(&spec, 77).unwrap();
        let x = draw.cores[0][(0, 0)];
        assert!((draw.b[(0, 0)].re - x.norm_sqr()).abs() < 1e-15);
        assert_eq!(draw.b[(0, 0)].im, 0.0);
    }

    #[test]
    fn draws_are_deterministic_and_psd() {
        let spec = recipe(6, false)
            .build()
            .unwrap()
            .with_fading(FadingSpec::LogNormal { sigma: 0.9 });
        let a = assemble_channel(&spec, 1234).unwrap();
        let b = assemble_channel(&spec, 1234).unwrap();
        assert_eq!(a, b);
        assert!(hermitian_asymmetry(&a.b) == 0.0);
        assert!(hermitian_eigenvalues(&a.b)[0] > -1e-12);
    }

    #[test]
    fn analytic_power_targets() {
        let no_los = recipe(8, false).build().unwrap();
        for pc in power_check(&no_los, 1, 0).unwrap() {
            assert!((pc.analytic - 8.0).abs() < 1e-9);
        }
        let los = recipe(8, true).build().unwrap();
        for pc in power_check(&los, 1, 0).unwrap() {
            assert!((pc.analytic - 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empirical_power_concentrates() {
        let spec = recipe(8, false).build().unwrap();
        for pc in power_check(&spec, 10_000, 3).unwrap() {
            assert!(
                (pc.empirical - pc.analytic).abs() / pc.analytic < 0.05,
                "{pc:?}"
            );
        }
        assert!(power_check(&spec, 0, 3).is_err());
    }
}
