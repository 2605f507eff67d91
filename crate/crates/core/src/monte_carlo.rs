//! Empirical spectra, Stieltjes transforms and mutual information over seeded ensembles.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelDraw, ChannelSampler, FadingSpec, ScenarioSpec};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_asymmetry, hermitian_eigenvalues, is_zero, logdet_hpd, CMat};
use crate::seed;

/// Relative asymmetry above which an input is not treated as Hermitian.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

fn require_hermitian(b: &CMat) -> Result<()> {
    if b.nrows() != b.ncols() {
        return Err(Error::Dimension(format!("B must be square, got {:?}", b.shape())));
    }
    let asymmetry = hermitian_asymmetry(b);
    if asymmetry > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian {
            name: "B".into(),
            asymmetry,
        });
    }
    Ok(())
}

fn require_off_spectrum(z: Complex64) -> Result<()> {
    if z.im == 0.0 && z.re >= 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter(format!("z = {z} must lie off the non-negative real axis")));
    }
    Ok(())
}

/// Empirical spectral distribution of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of eigenvalues `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.eigenvalues.partition_point(|&l| l <= x);
        count as f64 / self.eigenvalues.len() as f64
    }

    /// `(1/N) Σ 1/(λ − z)`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        let sum: Complex64 = self.eigenvalues.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum();
        sum / self.eigenvalues.len() as f64
    }

    /// `(1/N) Σ log(1 + λ/σ²)`, negative eigenvalue noise clamped to zero.
    pub fn shannon(&self, sigma2: f64) -> f64 {
        let sum: f64 = self.eigenvalues.iter().map(|&l| (l.max(0.0) / sigma2).ln_1p()).sum();
        sum / self.eigenvalues.len() as f64
    }

    /// `(1/N) tr B`.
    pub fn mean(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.eigenvalues.len() as f64
    }
}

pub fn esd(b: &CMat) -> Result<Spectrum> {
    require_hermitian(b)?;
    if b.nrows() == 0 {
        return Err(Error::Dimension("empty matrix has no spectrum".into()));
    }
    Ok(Spectrum {
        eigenvalues: hermitian_eigenvalues(b),
    })
}

/// `(1/N) tr (B − zI)⁻¹`.
pub fn empirical_stieltjes(b: &CMat, z: Complex64) -> Result<Complex64> {
    require_off_spectrum(z)?;
    Ok(esd(b)?.stieltjes(z))
}

fn require_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")))
    }
}

/// Mutual information of one draw in nats per receive antenna. With `S ≠ 0` this is
/// `(1/N)[logdet(I + S + HHᴴ/σ²) − logdet(I + S)]`.
pub fn empirical_mutual_info(draw: &ChannelDraw, sigma2: f64) -> Result<f64> {
    require_sigma2(sigma2)?;
    let hh = &draw.h * draw.h.adjoint();
    if is_zero(&draw.s) {
        return Ok(esd(&hh)?.shannon(sigma2));
    }
    mutual_info_with_interference(&draw.s, &hh, &[sigma2]).map(|v| v[0])
}

fn mutual_info_with_interference(s: &CMat, hh: &CMat, sigma2: &[f64]) -> Result<Vec<f64>> {
    let n = s.nrows();
    let base = CMat::identity(n, n) + s;
    let floor = logdet_hpd(&base, "I + S")?;
    sigma2
        .iter()
        .map(|&s2| {
            require_sigma2(s2)?;
            let m = &base + hh.unscale(s2);
            Ok(((logdet_hpd(&m, "I + S + HH^H/sigma2")? - floor) / n as f64).max(0.0))
        })
        .collect()
}

/// What to evaluate on every draw of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleQuery {
    /// Mutual information at each noise variance.
    MutualInfo(Vec<f64>),
    /// Stieltjes transform of `B_N` at each point.
    Stieltjes(Vec<Complex64>),
}

impl EnsembleQuery {
    pub fn len(&self) -> usize {
        match self {
            EnsembleQuery::MutualInfo(g) => g.len(),
            EnsembleQuery::Stieltjes(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            EnsembleQuery::MutualInfo(g) => g.iter().try_for_each(|&s| require_sigma2(s)),
            EnsembleQuery::Stieltjes(g) => g.iter().try_for_each(|&z| require_off_spectrum(z)),
        }
    }

    fn evaluate(&self, draw: &ChannelDraw) -> Result<Vec<Complex64>> {
        match self {
            EnsembleQuery::Stieltjes(grid) => {
                let spectrum = esd(&draw.b)?;
                Ok(grid.iter().map(|&z| spectrum.stieltjes(z)).collect())
            }
            EnsembleQuery::MutualInfo(grid) => {
                let hh = &draw.h * draw.h.adjoint();
                let values = if is_zero(&draw.s) {
                    let spectrum = esd(&hh)?;
                    grid.iter().map(|&s| spectrum.shannon(s)).collect()
                } else {
                    mutual_info_with_interference(&draw.s, &hh, grid)?
                };
                Ok(values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
            }
        }
    }
}

/// Sample mean and unbiased variance `E|x − mean|²` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub mean: Complex64,
    pub variance: f64,
}

impl PointStats {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One-pass Welford accumulator over complex samples.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: usize,
    mean: Complex64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: Complex64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += (delta * (x - self.mean).conj()).re;
    }

    fn finish(&self) -> PointStats {
        let variance = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        } else {
            0.0
        };
        PointStats {
            mean: self.mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub query: EnsembleQuery,
    /// One entry per grid point of `query`.
    pub points: Vec<PointStats>,
    pub trials: usize,
    pub master_seed: u64,
}

/// Seed of trial `t`; `derive(master_seed, t)`.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    seed::derive(master_seed, trial as u64)
}

/// Evaluates `f` on every trial in parallel and returns the values in trial order; the
/// reported failure is always the lowest failing trial index.
fn per_trial<T: Send>(
    trials: usize,
    master_seed: u64,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = (0..trials)
        .into_par_iter()
        .map(|t| f(trial_seed(master_seed, t)))
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(t, r)| {
            r.map_err(|e| Error::Trial {
                trial: t,
                source: Box::new(e),
            })
        })
        .collect()
}

fn require_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    Ok(())
}

/// Monte-Carlo ensemble of `query` over `trials` independent draws of `spec`.
///
/// Trials run in parallel, but statistics are accumulated in trial order, so results are
/// bitwise independent of the thread count.
pub fn run_ensemble(
    spec: &ScenarioSpec,
    query: &EnsembleQuery,
    trials: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    require_trials(trials)?;
    query.validate()?;
    let sampler = ChannelSampler::new(spec)?;
    let values = per_trial(trials, master_seed, |s| query.evaluate(&sampler.draw(s)?))?;
    let mut acc = vec![Welford::default(); query.len()];
    for row in &values {
        for (a, &x) in acc.iter_mut().zip(row) {
            a.push(x);
        }
    }
    Ok(EnsembleResult {
        query: query.clone(),
        points: acc.iter().map(Welford::finish).collect(),
        trials,
        master_seed,
    })
}

/// Paired comparison of the mean empirical Stieltjes transform under the scenario's
/// fading laws and under complex Gaussian fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    /// `|mean(m_spec − m_gauss)|`.
    pub gap: f64,
    /// Standard error of the paired mean difference.
    pub stderr: f64,
    pub mean_spec: Complex64,
    pub mean_gaussian: Complex64,
}

pub fn distribution_gap(
    spec: &ScenarioSpec,
    z: Complex64,
    trials: usize,
    master_seed: u64,
) -> Result<GapEstimate> {
    require_trials(trials)?;
    require_off_spectrum(z)?;
    let sampler = ChannelSampler::new(spec)?;
    let own: Vec<FadingSpec> = spec.users.iter().map(|u| u.fading).collect();
    let gaussian = vec![FadingSpec::ComplexGaussian; own.len()];
    let pairs = per_trial(trials, master_seed, |s| {
        let a = empirical_stieltjes(&sampler.draw_with(s, &own)?.b, z)?;
        let b = empirical_stieltjes(&sampler.draw_with(s, &gaussian)?.b, z)?;
        Ok((a, b))
    })?;
    let (mut diff, mut first, mut second) = (Welford::default(), Welford::default(), Welford::default());
    for &(a, b) in &pairs {
        diff.push(a - b);
        first.push(a);
        second.push(b);
    }
    let d = diff.finish();
    Ok(GapEstimate {
        gap: d.mean.norm(),
        stderr: (d.variance / trials as f64).sqrt(),
        mean_spec: first.finish().mean,
        mean_gaussian: second.finish().mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det_equiv::{det_shannon, SolverOptions};
    use crate::linalg::{c, identity, real_diagonal};
    use crate::channel::{ScenarioRecipe, UserSpec};
    use proptest::prelude::*;

    fn iid(n_rx: usize, n: usize, fading: FadingSpec) -> ScenarioSpec {
        ScenarioSpec {
            n_rx,
            users: vec![UserSpec {
                n,
                r: identity(n_rx),
                t: identity(n),
                hbar: CMat::zeros(n_rx, n),
                fading,
            }],
            s: CMat::zeros(n_rx, n_rx),
        }
    }

    fn los_scenario() -> ScenarioSpec {
        serde_json::from_str::<ScenarioRecipe>(
            r#"{"N": 6, "users": [
                {"n": 4, "R": "random_diagonal", "T": {"ula": {"mean_deg": 0, "spread_deg": 10}}, "los": true},
                {"n": 6, "R": "random_diagonal", "T": "identity", "los": true}
            ], "seed": 3}"#,
        )
        .unwrap()
        .build()
        .unwrap()
    }

    #[test]
    fn stieltjes_of_simple_spectra() {
        assert_eq!(empirical_stieltjes(&identity(3), c(-1.0, 0.0)).unwrap(), c(0.5, 0.0));
        let zero = CMat::zeros(4, 4);
        assert!((empirical_stieltjes(&zero, c(-0.25, 0.0)).unwrap() - c(4.0, 0.0)).norm() < 1e-14);
        let two = real_diagonal(&[1.0, 3.0]);
        assert!((empirical_stieltjes(&two, c(-1.0, 0.0)).unwrap() - c(0.375, 0.0)).norm() < 1e-14);
        assert!(empirical_stieltjes(&two, c(2.0, 0.0)).is_err());
    }

    #[test]
    fn esd_steps() {
        let s = esd(&identity(4)).unwrap();
        assert_eq!(s.cdf(0.5), 0.0);
        assert_eq!(s.cdf(1.0), 1.0);
        let s = esd(&real_diagonal(&[0.0, 2.0, 0.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(s.cdf(1.0), 0.5);
        let asym = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(esd(&asym), Err(Error::NotHermitian { .. })));
    }

    fn fixed_draw(h: CMat, s: CMat) -> ChannelDraw {
        let b = &s + &h * h.adjoint();
        ChannelDraw {
            cores: vec![],
            h_users: vec![h.clone()],
            h,
            s,
            b,
        }
    }

    #[test]
    fn mutual_info_simple_cases() {
        let zero = fixed_draw(CMat::zeros(2, 3), CMat::zeros(2, 2));
        assert_eq!(empirical_mutual_info(&zero, 1.0).unwrap(), 0.0);
        let one = fixed_draw(identity(1), CMat::zeros(1, 1));
        assert!((empirical_mutual_info(&one, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let interfered = fixed_draw(CMat::zeros(2, 2), real_diagonal(&[0.5, 2.0]));
        assert!(empirical_mutual_info(&interfered, 0.3).unwrap().abs() < 1e-14);
        let h = CMat::from_fn(2, 2, |i, j| c((i + j) as f64, 0.5));
        let both = fixed_draw(h.clone(), real_diagonal(&[0.5, 2.0]));
        let expected = (logdet_hpd(&(identity(2) + real_diagonal(&[0.5, 2.0]) + &h * h.adjoint() * c(0.5, 0.0)), "").unwrap()
            - (1.5f64.ln() + 3f64.ln()))
            / 2.0;
        assert!((empirical_mutual_info(&both, 2.0).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn single_trial_has_zero_variance() {
        let r = run_ensemble(&iid(4, 4, FadingSpec::ComplexGaussian), &EnsembleQuery::MutualInfo(vec![1.0]), 1, 7).unwrap();
        assert_eq!(r.points[0].variance, 0.0);
        assert!(run_ensemble(&iid(4, 4, FadingSpec::ComplexGaussian), &EnsembleQuery::MutualInfo(vec![1.0]), 0, 7).is_err());
    }

    #[test]
    fn ensembles_are_reproducible_across_thread_counts() {
        let spec = los_scenario();
        let query = EnsembleQuery::Stieltjes(vec![c(-1.0, 0.0), c(0.5, 0.5)]);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&spec, &query, 64, 99)).unwrap();
        let b = four.install(|| run_ensemble(&spec, &query, 64, 99)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, run_ensemble(&spec, &query, 64, 100).unwrap());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<Complex64> = (0..50).map(|i| c((i as f64).sin() * 3.0 + 1e6, (i as f64).cos())).collect();
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean: Complex64 = xs.iter().sum::<Complex64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / 49.0;
        let s = w.finish();
        assert!((s.mean - mean).norm() < 1e-9);
        assert!((s.variance - var).abs() < 1e-8 * var);
    }

    #[test]
    fn ensemble_mean_tracks_deterministic_equivalent() {
        let spec = iid(16, 16, FadingSpec::ComplexGaussian);
        let r = run_ensemble(&spec, &EnsembleQuery::MutualInfo(vec![1.0]), 2000, 2024).unwrap();
        let de = det_shannon(&spec, 1.0, &SolverOptions::default()).unwrap();
        let p = r.points[0];
        assert!((p.mean.re - de).abs() <= 3.0 * p.std() / 2000f64.sqrt() + 0.02 * de);
    }

    #[test]
    fn mean_trace_matches_power_normalization() {
        let spec = los_scenario();
        let sampler = ChannelSampler::new(&spec).unwrap();
        let traces = per_trial(2000, 5, |s| Ok(esd(&sampler.draw(s)?.b)?.mean())).unwrap();
        let mut w = Welford::default();
        traces.iter().for_each(|&t| w.push(c(t, 0.0)));
        let s = w.finish();
        let target = 2.0 * spec.num_users() as f64;
        assert!((s.mean.re - target).abs() <= 3.0 * s.std() / 2000f64.sqrt());
    }

    #[test]
    fn gaussian_gap_is_exactly_zero() {
        let g = distribution_gap(&iid(4, 4, FadingSpec::ComplexGaussian), c(-1.0, 0.0), 200, 1).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.stderr, 0.0);
    }

    #[test]
    fn nakagami_gap_within_confidence() {
        let spec = iid(16, 16, FadingSpec::nakagami(0.6).unwrap());
        let g = distribution_gap(&spec, c(-1.0, 0.0), 5000, 77).unwrap();
        assert!(g.gap <= 3.0 * g.stderr + 0.01, "{g:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn upper_half_plane_maps_to_upper_half_plane(seed in any::<u64>(), re in -3.0..3.0f64, im in 1e-3..3.0f64) {
            let draw = crate::channel::assemble_channel(&los_scenario(), seed).unwrap();
            let m = empirical_stieltjes(&draw.b, c(re, im)).unwrap();
            prop_assert!(m.im > 0.0);
        }

        #[test]
        fn mutual_info_nonincreasing_in_noise(seed in any::<u64>(), a in 1e-3..1e3f64, b in 1e-3..1e3f64) {
            let draw = crate::channel::assemble_channel(&los_scenario(), seed).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(empirical_mutual_info(&draw, lo).unwrap() >= empirical_mutual_info(&draw, hi).unwrap());
        }
    }
}
