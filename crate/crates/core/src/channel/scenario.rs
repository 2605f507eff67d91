//! K-user scenario description: per-user correlations, LOS components, interference
//! and fading, plus construction and normalization from raw inputs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fading::FadingSpec;
use super::ula::ula_correlation;
use crate::error::{Error, Result};
use crate::linalg::{check_hermitian_psd, frobenius_sq, is_diagonal, is_zero, trace, CMat};
use crate::seed;

/// Relative tolerance on the trace normalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// One transmitter of the multiple-access channel.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    /// Transmit dimension `n_k`.
    pub n: usize,
    /// Receive-side correlation, `N × N`.
    pub r: CMat,
    /// Transmit-side correlation, `n_k × n_k`.
    pub t: CMat,
    /// Line-of-sight component, `N × n_k`; all-zero when absent.
    pub hbar: CMat,
    pub fading: FadingSpec,
}

/// Full model `B_N = S + Σ_k (R_k^{1/2} X_k T_k^{1/2} + H̄_k)(·)ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Receive dimension `N`.
    pub n_rx: usize,
    pub users: Vec<UserSpec>,
    /// Interference covariance, `N × N`; all-zero when absent.
    pub s: CMat,
}

impl ScenarioSpec {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Total transmit dimension `n = Σ n_k`.
    pub fn n_total(&self) -> usize {
        self.users.iter().map(|u| u.n).sum()
    }

    /// Dimension ratio `β_k = N / n_k`.
    pub fn beta(&self, k: usize) -> f64 {
        self.n_rx as f64 / self.users[k].n as f64
    }

    /// Column offset of user `k` inside the stacked `n`-dimensional transmit space.
    pub fn offset(&self, k: usize) -> usize {
        self.users[..k].iter().map(|u| u.n).sum()
    }

    pub fn has_los(&self) -> bool {
        self.users.iter().any(|u| !is_zero(&u.hbar))
    }

    pub fn has_interference(&self) -> bool {
        !is_zero(&self.s)
    }

    /// Stacked LOS matrix `H̄ = [H̄_1 ⋯ H̄_K]`.
    pub fn hbar_stacked(&self) -> CMat {
        let mut out = CMat::zeros(self.n_rx, self.n_total());
        let mut col = 0;
        for u in &self.users {
            out.view_mut((0, col), (self.n_rx, u.n)).copy_from(&u.hbar);
            col += u.n;
        }
        out
    }

    /// Same deterministic matrices, every user switched to `fading`.
    pub fn with_fading(&self, fading: FadingSpec) -> ScenarioSpec {
        let mut out = self.clone();
        for u in &mut out.users {
            u.fading = fading;
        }
        out
    }

    /// Structural validation: dimensions, Hermitian PSD inputs, fading parameters and
    /// the diagonal-R requirement for multi-user LOS scenarios.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_rx;
        if n == 0 {
            return Err(Error::Dimension("receive dimension N must be positive".into()));
        }
        if self.users.is_empty() {
            return Err(Error::Dimension("scenario needs at least one user".into()));
        }
        if self.s.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "S must be {n}x{n}, got {:?}",
                self.s.shape()
            )));
        }
        check_hermitian_psd("S", &self.s)?;
        for (k, u) in self.users.iter().enumerate() {
            if u.n == 0 {
                return Err(Error::Dimension(format!("user {k}: n must be positive")));
            }
            if u.r.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "user {k}: R must be {n}x{n}, got {:?}",
                    u.r.shape()
                )));
            }
            if u.t.shape() != (u.n, u.n) {
                return Err(Error::Dimension(format!(
                    "user {k}: T must be {0}x{0}, got {1:?}",
                    u.n,
                    u.t.shape()
                )));
            }
            if u.hbar.shape() != (n, u.n) {
                return Err(Error::Dimension(format!(
                    "user {k}: Hbar must be {n}x{}, got {:?}",
                    u.n,
                    u.hbar.shape()
                )));
            }
            check_hermitian_psd(&format!("R[{k}]"), &u.r)?;
            check_hermitian_psd(&format!("T[{k}]"), &u.t)?;
            u.fading.validate()?;
        }
        if self.num_users() > 1 && self.has_los() {
            if let Some(k) = self.users.iter().position(|u| !is_diagonal(&u.r)) {
                return Err(Error::LosRequiresDiagonal { user: k });
            }
        }
        Ok(())
    }

    /// Checks `tr R_k = N`, `tr T_k = n_k` and `tr H̄_kH̄_kᴴ ∈ {0, N}` to [`NORMALIZATION_TOLERANCE`].
    pub fn check_normalized(&self) -> Result<()> {
        let n = self.n_rx as f64;
        for (k, u) in self.users.iter().enumerate() {
            let tr_r = trace(&u.r).re;
            let tr_t = trace(&u.t).re;
            if (tr_r - n).abs() > NORMALIZATION_TOLERANCE * n {
                return Err(Error::InvalidParameter(format!(
                    "user {k}: tr(R) = {tr_r}, expected {n}"
                )));
            }
            let nk = u.n as f64;
            if (tr_t - nk).abs() > NORMALIZATION_TOLERANCE * nk {
                return Err(Error::InvalidParameter(format!(
                    "user {k}: tr(T) = {tr_t}, expected {nk}"
                )));
            }
            let los = frobenius_sq(&u.hbar);
            if los != 0.0 && (los - n).abs() > NORMALIZATION_TOLERANCE * n {
                return Err(Error::InvalidParameter(format!(
                    "user {k}: tr(Hbar Hbarᴴ) = {los}, expected {n}"
                )));
            }
        }
        Ok(())
    }

    /// Copy rescaled so that `tr R_k = N`, `tr T_k = n_k` and `tr H̄_kH̄_kᴴ = N` (nonzero LOS only).
    pub fn normalized(&self) -> Result<ScenarioSpec> {
        self.validate()?;
        let n = self.n_rx as f64;
        let mut out = self.clone();
        for (k, u) in out.users.iter_mut().enumerate() {
            u.r = scale_to_trace(&u.r, n, &format!("R[{k}]"))?;
            u.t = scale_to_trace(&u.t, u.n as f64, &format!("T[{k}]"))?;
            let los = frobenius_sq(&u.hbar);
            if los > 0.0 {
                u.hbar *= Complex64::new((n / los).sqrt(), 0.0);
            }
        }
        Ok(out)
    }
}

fn scale_to_trace(m: &CMat, target: f64, name: &str) -> Result<CMat> {
    let tr = trace(m).re;
    if !(tr > 0.0) {
        return Err(Error::ZeroTrace(name.to_string()));
    }
    let mut out = m * Complex64::new(target / tr, 0.0);
    // Make the normalization exact on the diagonal sum.
    let residual = target - trace(&out).re;
    if residual != 0.0 {
        let i = (0..out.nrows())
            .max_by(|&a, &b| out[(a, a)].re.total_cmp(&out[(b, b)].re))
            .expect("non-empty");
        out[(i, i)] += Complex64::new(residual, 0.0);
    }
    Ok(out)
}

/// How a correlation matrix is provided or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    Identity,
    /// Diagonal gains drawn i.i.d. uniform on `(0, 1]`.
    RandomDiagonal,
    /// Half-wavelength ULA with Gaussian azimuth spread (degrees).
    Ula { mean_deg: f64, spread_deg: f64 },
    #[serde(skip)]
    Given(CMat),
}

/// How the LOS component is provided or generated.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LosSource {
    #[default]
    None,
    /// i.i.d. standard complex Gaussian entries.
    Random,
    Given(CMat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawUser {
    pub n: usize,
    pub r: MatrixSource,
    pub t: MatrixSource,
    pub hbar: LosSource,
    /// Per-user override of the scenario-wide fading law.
    pub fading: Option<FadingSpec>,
}

/// Unnormalized scenario inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScenario {
    pub n_rx: usize,
    pub users: Vec<RawUser>,
    pub s: Option<CMat>,
}

fn realize(source: &MatrixSource, dim: usize, rng: &mut ChaCha8Rng, name: &str) -> Result<CMat> {
    match source {
        MatrixSource::Identity => Ok(CMat::identity(dim, dim)),
        MatrixSource::RandomDiagonal => {
            // 1 - U lies in (0, 1].
            let d: Vec<f64> = (0..dim).map(|_| 1.0 - rng.gen::<f64>()).collect();
            Ok(crate::linalg::real_diagonal(&d))
        }
        MatrixSource::Ula {
            mean_deg,
            spread_deg,
        } => ula_correlation(dim, *mean_deg, *spread_deg),
        MatrixSource::Given(m) => {
            if m.shape() != (dim, dim) {
                return Err(Error::Dimension(format!(
                    "{name} must be {dim}x{dim}, got {:?}",
                    m.shape()
                )));
            }
            Ok(m.clone())
        }
    }
}

fn complex_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    })
}

/// Builds a normalized [`ScenarioSpec`] from raw or generated inputs.
///
/// Random diagonal `R_k` and random `H̄_k` are drawn from streams derived from `seed`
/// and the user index.
pub fn build_scenario(raw: &RawScenario, fading: FadingSpec, seed: u64) -> Result<ScenarioSpec> {
    let n = raw.n_rx;
    if n == 0 {
        return Err(Error::Dimension("receive dimension N must be positive".into()));
    }
    let mut users = Vec::with_capacity(raw.users.len());
    for (k, ru) in raw.users.iter().enumerate() {
        if ru.n == 0 {
            return Err(Error::Dimension(format!("user {k}: n must be positive")));
        }
        let mut r_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 2 * k as u64));
        let mut los_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 2 * k as u64 + 1));
        let r = realize(&ru.r, n, &mut r_rng, &format!("R[{k}]"))?;
        let t = realize(&ru.t, ru.n, &mut r_rng, &format!("T[{k}]"))?;
        let hbar = match &ru.hbar {
            LosSource::None => CMat::zeros(n, ru.n),
            LosSource::Random => complex_gaussian(n, ru.n, &mut los_rng),
            LosSource::Given(m) => {
                if m.shape() != (n, ru.n) {
                    return Err(Error::Dimension(format!(
                        "user {k}: Hbar must be {n}x{}, got {:?}",
                        ru.n,
                        m.shape()
                    )));
                }
                m.clone()
            }
        };
        users.push(UserSpec {
            n: ru.n,
            r,
            t,
            hbar,
            fading: ru.fading.unwrap_or(fading),
        });
    }
    let s = match &raw.s {
        Some(s) => s.clone(),
        None => CMat::zeros(n, n),
    };
    ScenarioSpec { n_rx: n, users, s }.normalized()
}

/// Serializable generator for a scenario family, parameterized by the receive dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecipe {
    #[serde(rename = "N")]
    pub n_rx: usize,
    pub users: Vec<RecipeUser>,
    #[serde(default)]
    pub fading: FadingSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeUser {
    /// Transmit dimension; defaults to `N`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(rename = "R", default = "identity_source")]
    pub r: MatrixSource,
    #[serde(rename = "T", default = "identity_source")]
    pub t: MatrixSource,
    #[serde(default)]
    pub los: bool,
    #[serde(default)]
    pub fading: Option<FadingSpec>,
}

fn identity_source() -> MatrixSource {
    MatrixSource::Identity
}

impl ScenarioRecipe {
    /// Same recipe at receive dimension `n_rx`; users without an explicit `n` follow `N`,
    /// explicit ones scale by the same factor.
    pub fn resized(&self, n_rx: usize) -> ScenarioRecipe {
        let mut out = self.clone();
        out.n_rx = n_rx;
        for u in &mut out.users {
            if let Some(n) = u.n {
                u.n = Some(((n * n_rx) as f64 / self.n_rx as f64).round().max(1.0) as usize);
            }
        }
        out
    }

    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            n_rx: self.n_rx,
            users: self
                .users
                .iter()
                .map(|u| RawUser {
                    n: u.n.unwrap_or(self.n_rx),
                    r: u.r.clone(),
                    t: u.t.clone(),
                    hbar: if u.los { LosSource::Random } else { LosSource::None },
                    fading: u.fading,
                })
                .collect(),
            s: None,
        }
    }

    pub fn build(&self) -> Result<ScenarioSpec> {
        build_scenario(&self.to_raw(), self.fading, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diagonal;

    fn raw_user(n: usize, r: MatrixSource, hbar: LosSource) -> RawUser {
        RawUser {
            n,
            r,
            t: MatrixSource::Identity,
            hbar,
            fading: None,
        }
    }

    #[test]
    fn scaled_identity_normalizes_to_identity() {
        let raw = RawScenario {
            n_rx: 4,
            users: vec![raw_user(
                3,
                MatrixSource::Given(real_diagonal(&[2.0; 4])),
                LosSource::None,
            )],
            s: None,
        };
        let spec = build_scenario(&raw, FadingSpec::ComplexGaussian, 0).unwrap();
        assert_eq!(spec.users[0].r, CMat::identity(4, 4));
        assert!(!spec.has_los());
    }

    #[test]
    fn zero_los_accepted_with_nondiagonal_r() {
        let r = ula_correlation(4, 10.0, 20.0).unwrap();
        let raw = RawScenario {
            n_rx: 4,
            users: vec![
                raw_user(2, MatrixSource::Given(r.clone()), LosSource::Given(CMat::zeros(4, 2))),
                raw_user(2, MatrixSource::Given(r), LosSource::None),
            ],
            s: None,
        };
        let spec = build_scenario(&raw, FadingSpec::ComplexGaussian, 0).unwrap();
        assert!(!spec.has_los());
    }

    #[test]
    fn multiuser_los_requires_diagonal_r() {
        let r = ula_correlation(4, 10.0, 20.0).unwrap();
        let raw = RawScenario {
            n_rx: 4,
            users: vec![
                raw_user(2, MatrixSource::Given(r), LosSource::Random),
                raw_user(2, MatrixSource::Identity, LosSource::None),
            ],
            s: None,
        };
        assert_eq!(
            build_scenario(&raw, FadingSpec::ComplexGaussian, 0),
            Err(Error::LosRequiresDiagonal { user: 0 })
        );
        // A single user may combine LOS with arbitrary correlation.
        let single = RawScenario {
            users: vec![raw.users[0].clone()],
            ..raw
        };
        assert!(build_scenario(&single, FadingSpec::ComplexGaussian, 0).is_ok());
    }

    #[test]
    fn zero_trace_rejected() {
        let raw = RawScenario {
            n_rx: 2,
            users: vec![raw_user(2, MatrixSource::Given(CMat::zeros(2, 2)), LosSource::None)],
            s: None,
        };
        assert_eq!(
            build_scenario(&raw, FadingSpec::ComplexGaussian, 0),
            Err(Error::ZeroTrace("R[0]".into()))
        );
    }

    #[test]
    fn inconsistent_dimensions_rejected() {
        let raw = RawScenario {
            n_rx: 3,
            users: vec![raw_user(2, MatrixSource::Given(CMat::identity(2, 2)), LosSource::None)],
            s: None,
        };
        assert!(matches!(
            build_scenario(&raw, FadingSpec::ComplexGaussian, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn random_components_are_normalized_and_seeded() {
        let raw = RawScenario {
            n_rx: 6,
            users: vec![
                raw_user(3, MatrixSource::RandomDiagonal, LosSource::Random),
                RawUser {
                    t: MatrixSource::Ula {
                        mean_deg: 30.0,
                        spread_deg: 10.0,
                    },
                    ..raw_user(5, MatrixSource::RandomDiagonal, LosSource::Random)
                },
            ],
            s: None,
        };
        let a = build_scenario(&raw, FadingSpec::ComplexGaussian, 11).unwrap();
        let b = build_scenario(&raw, FadingSpec::ComplexGaussian, 11).unwrap();
        let c = build_scenario(&raw, FadingSpec::ComplexGaussian, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.check_normalized().unwrap();
        for u in &a.users {
            assert!(is_diagonal(&u.r));
            assert!(u.r.diagonal().iter().all(|z| z.re > 0.0));
            assert!((frobenius_sq(&u.hbar) - 6.0).abs() <= 1e-10 * 6.0);
        }
    }

    #[test]
    fn recipe_round_trips_through_json() {
        let text = r#"{"N": 8, "users": [
            {"R": "random_diagonal", "T": {"ula": {"mean_deg": 20, "spread_deg": 10}}, "los": true},
            {"n": 4, "fading": {"family": "nakagami", "m": 0.6}}
        ], "fading": {"family": "lognormal", "sigma": 0.8}, "seed": 3}"#;
        let recipe: ScenarioRecipe = serde_json::from_str(text).unwrap();
        let spec = recipe.build().unwrap();
        assert_eq!(spec.n_total(), 12);
        assert_eq!(spec.users[0].fading, FadingSpec::LogNormal { sigma: 0.8 });
        assert_eq!(spec.users[1].fading, FadingSpec::Nakagami { m: 0.6 });
        let resized = recipe.resized(16);
        assert_eq!(resized.users[1].n, Some(8));
        let back: ScenarioRecipe =
            serde_json::from_str(&serde_json::to_string(&recipe).unwrap()).unwrap();
        assert_eq!(back, recipe);
    }
}
