//! The invariant suite behind `rmtde validate`.

use num_complex::Complex64;
use rmtde_core::channel::{
    assemble_channel, cv_of, power_check, sample_amplitudes, sample_fading, ula_correlation, ChannelSampler,
    FadingSpec, ScenarioSpec, UserSpec,
};
use rmtde_core::covariance::{optimize_covariance, CovarianceOptions};
use rmtde_core::det_equiv::{
    det_shannon, det_stieltjes, first_moment, moment_identity, shannon_derivative, shannon_via_integral,
    solve_fixed_point, uniqueness_diagnostic, DetEquivResult, IntegralOptions, SolverOptions,
};
use rmtde_core::linalg::{hermitian_asymmetry, hermitian_eigenvalues, identity, is_zero, trace, trace_product};
use rmtde_core::monte_carlo::{empirical_mutual_info, empirical_stieltjes, run_ensemble, trial_seed, EnsembleQuery};

use crate::commands::{Context, Report};
use crate::config::Scenario;
use crate::error::{CliError, CliResult};
use crate::plotdata::{emit_plotdata, Table};
use crate::scenarios::shipped;

/// Ensemble size for the Monte-Carlo checks when the config sets no `trials`.
pub const DEFAULT_TRIALS: usize = 1000;

const NOISE_GRID: [f64; 4] = [1e-2, 0.1, 1.0, 10.0];
const PROBE_DRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub scenario: String,
    pub status: Status,
    pub detail: String,
}

type Outcome = Result<(Status, String), String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    Ok((if ok { Status::Pass } else { Status::Fail }, detail))
}

fn skip(reason: &str) -> Outcome {
    Ok((Status::Skip, reason.to_string()))
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &'static str, scenario: &str, outcome: Outcome) {
        let (status, detail) = outcome.unwrap_or_else(|e| (Status::Fail, e));
        self.checks.push(Check {
            name,
            scenario: scenario.to_string(),
            status,
            detail,
        });
    }
}

/// Runs every check and returns them in execution order.
pub fn run_checks(scenarios: &[(String, Scenario)], opts: &SolverOptions, trials: usize, seed: u64) -> Vec<Check> {
    let mut suite = Suite { checks: Vec::new() };
    for (name, scenario) in scenarios {
        let spec = match scenario.spec() {
            Ok(s) => s,
            Err(e) => {
                suite.record("build", name, Err(e.to_string()));
                continue;
            }
        };
        scenario_checks(&mut suite, name, scenario, &spec, opts, trials, seed);
    }
    global_checks(&mut suite, opts, seed);
    suite.checks
}

pub fn run(ctx: &Context) -> CliResult<Report> {
    let scenarios = match &ctx.scenario {
        Some(s) => vec![s.clone()],
        None => shipped()?,
    };
    let trials = ctx.config.trials.unwrap_or(DEFAULT_TRIALS);
    let checks = run_checks(&scenarios, &ctx.solver, trials, ctx.seed);
    let mut table = Table::new(&["check", "scenario", "status", "detail"]);
    for c in &checks {
        table.push(vec![c.name.into(), c.scenario.as_str().into(), c.status.as_str().into(), c.detail.as_str().into()]);
    }
    let files = emit_plotdata(&ctx.out, &[("validate".to_string(), table)])?;
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let summary = vec![format!(
        "{} checks: {} passed, {} failed, {} skipped",
        checks.len(),
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skip)
    )];
    if let Some(first) = checks.iter().find(|c| c.status == Status::Fail) {
        return Err(CliError::Validation(format!(
            "check `{}` failed on scenario `{}`: {} ({} of {} checks failed)",
            first.name,
            first.scenario,
            first.detail,
            count(Status::Fail),
            checks.len()
        )));
    }
    Ok(Report { files, summary })
}

fn los_users(spec: &ScenarioSpec) -> usize {
    spec.users.iter().filter(|u| !is_zero(&u.hbar)).count()
}

fn solve_real(spec: &ScenarioSpec, sigma2: f64, opts: &SolverOptions) -> Result<DetEquivResult, String> {
    let r = solve_fixed_point(spec, Complex64::new(-sigma2, 0.0), opts).map_err(fail)?;
    r.require_converged().map_err(|e| format!("sigma2 = {sigma2}: {e}"))?;
    Ok(r)
}

fn scenario_checks(
    suite: &mut Suite,
    name: &str,
    scenario: &Scenario,
    spec: &ScenarioSpec,
    opts: &SolverOptions,
    trials: usize,
    seed: u64,
) {
    suite.record("normalization", name, spec.check_normalized().map_err(fail).map(|_| (Status::Pass, String::new())));
    suite.record("channel_power", name, channel_power(spec, seed));
    suite.record("draw_purity", name, draw_purity(spec, seed));
    suite.record("positivity", name, positivity(spec, opts));
    suite.record("self_consistency", name, self_consistency(spec, opts));
    suite.record("uniqueness", name, uniqueness(spec, opts));
    suite.record("moments", name, moments(spec, opts));
    suite.record("large_noise", name, large_noise(spec, opts));
    suite.record("permutation", name, permutation(spec, opts));
    suite.record("integral_vs_closed_form", name, integral(spec, opts));
    suite.record("derivative_identity", name, derivative(spec, opts));
    suite.record("shannon_monotone", name, shannon_monotone(spec, opts));
    suite.record("trace_mean", name, trace_mean(spec, seed));
    suite.record("mc_vs_de", name, mc_vs_de(spec, opts, trials, seed));
    suite.record("stieltjes_upper_half_plane", name, stieltjes_half_plane(spec, seed));
    suite.record("mutual_info_monotone", name, mutual_info_monotone(spec, seed));
    suite.record("variance_shrinks", name, variance_shrinks(scenario, trials, seed));
    suite.record("covariance", name, covariance(spec, opts));
}

fn channel_power(spec: &ScenarioSpec, seed: u64) -> Outcome {
    let checks = power_check(spec, 2000, seed).map_err(fail)?;
    let worst = checks
        .iter()
        .map(|c| (c.empirical - c.analytic).abs() / c.analytic)
        .fold(0.0, f64::max);
    verdict(worst <= 0.05, format!("worst relative deviation {worst:.4}"))
}

fn draw_purity(spec: &ScenarioSpec, seed: u64) -> Outcome {
    let a = assemble_channel(spec, seed).map_err(fail)?;
    let b = assemble_channel(spec, seed).map_err(fail)?;
    let f = spec.users[0].fading;
    let x = sample_fading(&f, spec.n_rx, spec.users[0].n, seed).map_err(fail)?;
    let y = sample_fading(&f, spec.n_rx, spec.users[0].n, seed).map_err(fail)?;
    verdict(a == b && x == y, "repeated draws compared bitwise".into())
}

fn positivity(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    for s2 in NOISE_GRID {
        let r = solve_real(spec, s2, opts)?;
        let st = &r.state;
        if let Some(x) = st.e.iter().chain(&st.e_tilde).find(|x| !(x.re > 0.0 && x.im == 0.0)) {
            return verdict(false, format!("sigma2 = {s2}: non-positive entry {x}"));
        }
        let m = r.stieltjes;
        if !(m.re > 0.0 && m.re < 1.0 / s2) {
            return verdict(false, format!("sigma2 = {s2}: stieltjes {m} outside (0, 1/sigma2)"));
        }
    }
    verdict(true, format!("sigma2 in {NOISE_GRID:?}"))
}

fn self_consistency(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let mut worst = 0.0_f64;
    for z in [Complex64::new(-0.1, 0.0), Complex64::new(-0.2, 0.4), Complex64::new(1.0, 0.5)] {
        let r = solve_fixed_point(spec, z, opts).map_err(fail)?;
        r.require_converged().map_err(|e| format!("z = {z}: {e}"))?;
        for (k, u) in spec.users.iter().enumerate() {
            let e = trace_product(&u.r, &r.psi) / spec.n_rx as f64;
            let o = spec.offset(k);
            let block = r.psi_tilde.view((o, o), (u.n, u.n)).clone_owned();
            let et = trace_product(&u.t, &block) / u.n as f64;
            worst = worst
                .max((e - r.state.e[k]).norm())
                .max((et - r.state.e_tilde[k]).norm());
        }
    }
    verdict(worst <= 2.0 * opts.tol, format!("max change {worst:.3e}"))
}

fn uniqueness(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let mut rho_max = 0.0_f64;
    let mut margin = f64::INFINITY;
    for s2 in NOISE_GRID {
        let r = solve_real(spec, s2, opts)?;
        let d = uniqueness_diagnostic(spec, &r).map_err(|e| format!("sigma2 = {s2}: {e}"))?;
        rho_max = rho_max.max(d.spectral_radius);
        margin = margin.min(d.min_margin());
    }
    verdict(
        rho_max < 1.0 && margin > 0.0,
        format!("max spectral radius {rho_max:.6}, min margin {margin:.6}"),
    )
}

fn moments(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let expected = (spec.num_users() + los_users(spec)) as f64;
    let m = moment_identity(spec, opts).map_err(fail)?;
    let probe_err = (m.probe - m.trace_formula).abs() / m.trace_formula;
    verdict(
        (m.trace_formula - expected).abs() <= 1e-10 && probe_err <= 1e-3,
        format!("trace formula {} (expected {expected}), probe relative error {probe_err:.3e}", m.trace_formula),
    )
}

fn large_noise(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let s2 = 1e6;
    let v = det_shannon(spec, s2, opts).map_err(fail)?;
    let target = first_moment(spec) / s2;
    let rel = (v - target).abs() / target;
    verdict(rel <= 0.01, format!("V(1e6) * 1e6 = {}, relative error {rel:.3e}", v * s2))
}

fn permutation(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    if spec.num_users() < 2 {
        return skip("single user");
    }
    let mut reversed = spec.clone();
    reversed.users.reverse();
    let z = Complex64::new(-1.0, 0.0);
    let a = solve_fixed_point(spec, z, opts).map_err(fail)?;
    let b = solve_fixed_point(&reversed, z, opts).map_err(fail)?;
    let k = spec.num_users();
    let worst = (0..k)
        .map(|i| (a.state.e[i] - b.state.e[k - 1 - i]).norm() + (a.state.e_tilde[i] - b.state.e_tilde[k - 1 - i]).norm())
        .fold((a.stieltjes - b.stieltjes).norm(), f64::max);
    verdict(worst <= 10.0 * opts.tol, format!("max deviation {worst:.3e}"))
}

fn integral(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let iopts = IntegralOptions {
        solver: *opts,
        ..IntegralOptions::default()
    };
    let mut worst = 0.0_f64;
    for s2 in [0.1, 1.0, 10.0] {
        let closed = det_shannon(spec, s2, opts).map_err(fail)?;
        let via = shannon_via_integral(spec, s2, &iopts).map_err(fail)?;
        worst = worst.max((via - closed).abs() / closed);
    }
    verdict(worst <= 1e-3, format!("max relative difference {worst:.3e}"))
}

fn derivative(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let tight = opts.with_tol(1e-14);
    let error = |s2: f64, h: f64| -> Result<f64, String> {
        let up = det_shannon(spec, s2 + h, &tight).map_err(fail)?;
        let down = det_shannon(spec, s2 - h, &tight).map_err(fail)?;
        let exact = shannon_derivative(spec, s2, &tight).map_err(fail)?;
        Ok(((up - down) / (2.0 * h) - exact).abs())
    };
    let mut worst = f64::INFINITY;
    for s2 in [0.5, 1.0, 2.0, 5.0] {
        let ratio = error(s2, 1e-2)? / error(s2, 5e-3)?;
        worst = worst.min(ratio);
    }
    verdict(worst >= 3.5, format!("min error ratio {worst:.3}"))
}

fn shannon_monotone(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    let values = NOISE_GRID
        .iter()
        .map(|&s2| det_shannon(spec, s2, opts))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(fail)?;
    verdict(values.windows(2).all(|w| w[1] < w[0]), format!("{values:?}"))
}

fn trace_mean(spec: &ScenarioSpec, seed: u64) -> Outcome {
    let trials = 2000;
    let sampler = ChannelSampler::new(spec).map_err(fail)?;
    let mut values = Vec::with_capacity(trials);
    for t in 0..trials {
        let draw = sampler.draw(trial_seed(seed, t)).map_err(fail)?;
        values.push(trace(&draw.b).re / spec.n_rx as f64);
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let stderr = (var / trials as f64).sqrt();
    let expected = (spec.num_users() + los_users(spec)) as f64;
    verdict(
        (mean - expected).abs() <= 3.0 * stderr,
        format!("mean {mean:.6}, expected {expected}, stderr {stderr:.3e}"),
    )
}

fn mc_vs_de(spec: &ScenarioSpec, opts: &SolverOptions, trials: usize, seed: u64) -> Outcome {
    if spec.n_rx < 8 {
        return skip("N < 8");
    }
    let grid = vec![0.1, 1.0];
    let mc = run_ensemble(spec, &EnsembleQuery::MutualInfo(grid.clone()), trials, seed).map_err(fail)?;
    let mut detail = Vec::new();
    let mut ok = true;
    for (s2, p) in grid.iter().zip(&mc.points) {
        let de = det_shannon(spec, *s2, opts).map_err(fail)?;
        let bound = (3.0 * p.std() / (trials as f64).sqrt()).max(0.02 * de);
        let diff = (p.mean.re - de).abs();
        ok &= diff <= bound;
        detail.push(format!("sigma2 = {s2}: |{:.6} - {de:.6}| vs {bound:.3e}", p.mean.re));
    }
    verdict(ok, detail.join("; "))
}

fn stieltjes_half_plane(spec: &ScenarioSpec, seed: u64) -> Outcome {
    let sampler = ChannelSampler::new(spec).map_err(fail)?;
    let points = [Complex64::new(1.0, 0.1), Complex64::new(-1.0, 1e-3), Complex64::new(4.0, 2.0)];
    for t in 0..PROBE_DRAWS {
        let draw = sampler.draw(trial_seed(seed, t)).map_err(fail)?;
        for z in points {
            let m = empirical_stieltjes(&draw.b, z).map_err(fail)?;
            if !(m.im > 0.0) {
                return verdict(false, format!("draw {t}, z = {z}: m = {m}"));
            }
        }
    }
    verdict(true, format!("{PROBE_DRAWS} draws"))
}

fn mutual_info_monotone(spec: &ScenarioSpec, seed: u64) -> Outcome {
    let sampler = ChannelSampler::new(spec).map_err(fail)?;
    let grid = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
    for t in 0..PROBE_DRAWS {
        let draw = sampler.draw(trial_seed(seed, t)).map_err(fail)?;
        let values = grid
            .iter()
            .map(|&s2| empirical_mutual_info(&draw, s2))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(fail)?;
        if values.windows(2).any(|w| w[1] > w[0]) {
            return verdict(false, format!("draw {t}: {values:?}"));
        }
    }
    verdict(true, format!("{PROBE_DRAWS} draws"))
}

fn variance_shrinks(scenario: &Scenario, trials: usize, seed: u64) -> Outcome {
    if !matches!(scenario, Scenario::Recipe(_)) {
        return skip("fixed-size scenario");
    }
    let query = EnsembleQuery::MutualInfo(vec![1e-3]);
    let mut variances = Vec::new();
    for n in [4, 16] {
        let spec = scenario.at_size(n).map_err(fail)?;
        variances.push(run_ensemble(&spec, &query, trials, seed).map_err(fail)?.points[0].variance);
    }
    verdict(
        variances[1] < variances[0],
        format!("variance N=4 {:.4e}, N=16 {:.4e}", variances[0], variances[1]),
    )
}

fn covariance(spec: &ScenarioSpec, opts: &SolverOptions) -> Outcome {
    if spec.has_los() || spec.has_interference() {
        return skip("needs Hbar = 0 and S = 0");
    }
    let copts = CovarianceOptions {
        solver: *opts,
        ..CovarianceOptions::default()
    };
    let sol = optimize_covariance(spec, 0.1, &copts).map_err(fail)?;
    let slack = 1e-12 * sol.rate.abs().max(1.0);
    if sol.rate_trajectory.windows(2).any(|w| w[1] < w[0] - slack) {
        return verdict(false, format!("rate decreased: {:?}", sol.rate_trajectory));
    }
    if sol.rate < sol.rate_trajectory[0] - slack {
        return verdict(false, format!("rate {} below uniform {}", sol.rate, sol.rate_trajectory[0]));
    }
    for (k, (q, u)) in sol.q.iter().zip(&spec.users).enumerate() {
        let comm = (q * &u.t - &u.t * q).norm();
        if comm > 1e-10 * u.t.norm() * q.norm() {
            return verdict(false, format!("user {k}: Q does not commute with T ({comm:.3e})"));
        }
        if (trace(q).re - u.n as f64).abs() > 1e-10 * u.n as f64 {
            return verdict(false, format!("user {k}: tr Q = {}", trace(q).re));
        }
    }
    let swapped = optimize_covariance(&spec.with_fading(FadingSpec::ComplexGaussian), 0.1, &copts).map_err(fail)?;
    let lognormal = FadingSpec::lognormal_with_cv(1.0).map_err(fail)?;
    let swapped_again = optimize_covariance(&spec.with_fading(lognormal), 0.1, &copts).map_err(fail)?;
    if swapped.q != swapped_again.q || swapped.rate != swapped_again.rate || swapped.rate != sol.rate {
        return verdict(false, "result depends on the fading family".into());
    }
    verdict(
        true,
        format!("rate {:.6} vs uniform {:.6} after {} iterations", sol.rate, sol.rate_trajectory[0], sol.iterations),
    )
}

fn global_checks(suite: &mut Suite, opts: &SolverOptions, seed: u64) {
    suite.record("marchenko_pastur", "-", marchenko_pastur(opts));
    suite.record("fading_second_moment", "-", second_moments(seed));
    suite.record("nakagami_cv_monotone", "-", nakagami_cv());
    suite.record("ula_structure", "-", ula_structure());
}

fn marchenko_pastur(opts: &SolverOptions) -> Outcome {
    let mut worst = 0.0_f64;
    for (n_rx, n) in [(8, 16), (8, 8), (16, 8)] {
        let spec = ScenarioSpec {
            n_rx,
            users: vec![UserSpec {
                n,
                r: identity(n_rx),
                t: identity(n),
                hbar: rmtde_core::linalg::CMat::zeros(n_rx, n),
                fading: FadingSpec::ComplexGaussian,
            }],
            s: rmtde_core::linalg::CMat::zeros(n_rx, n_rx),
        };
        let z = -1.0;
        let c = n_rx as f64 / n as f64;
        let b = 1.0 - c - z;
        let exact = (b - (b * b - 4.0 * c * z).sqrt()) / (2.0 * c * z);
        let m = det_stieltjes(&spec, Complex64::new(z, 0.0), opts).map_err(fail)?;
        worst = worst.max((m - exact).norm());
    }
    verdict(worst <= 1e-6, format!("max deviation {worst:.3e}"))
}

fn second_moments(seed: u64) -> Outcome {
    let laws = [
        FadingSpec::ComplexGaussian,
        FadingSpec::Nakagami { m: 0.6 },
        FadingSpec::Nakagami { m: 2.0 },
        FadingSpec::lognormal_with_cv(0.5).map_err(fail)?,
        FadingSpec::lognormal_with_cv(1.0).map_err(fail)?,
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for law in laws {
        let a = sample_amplitudes(&law, 1_000_000, seed).map_err(fail)?;
        let m2 = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
        ok &= (m2 - 1.0).abs() <= 0.01;
        detail.push(format!("{} {m2:.5}", law.label()));
    }
    verdict(ok, detail.join("; "))
}

fn nakagami_cv() -> Outcome {
    let cvs = [0.51, 1.0, 2.0, 5.0, 20.0]
        .iter()
        .map(|&m| cv_of(&FadingSpec::Nakagami { m }))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(fail)?;
    verdict(cvs.windows(2).all(|w| w[1] < w[0]), format!("{cvs:?}"))
}

fn ula_structure() -> Outcome {
    for (n, mean, spread) in [(4, 0.0, 5.0), (8, 20.0, 10.0), (16, -15.0, 5.0), (6, 45.0, 2.0)] {
        let r = ula_correlation(n, mean, spread).map_err(fail)?;
        let at = format!("n = {n}, mean {mean}, spread {spread}");
        if hermitian_asymmetry(&r) > 1e-12 {
            return verdict(false, format!("{at}: not Hermitian"));
        }
        let toeplitz = (1..n).all(|i| (1..n).all(|j| (r[(i, j)] - r[(i - 1, j - 1)]).norm() <= 1e-12));
        if !toeplitz {
            return verdict(false, format!("{at}: not Toeplitz"));
        }
        if (0..n).any(|i| (r[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-12) {
            return verdict(false, format!("{at}: diagonal differs from 1"));
        }
        let min = hermitian_eigenvalues(&r).into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return verdict(false, format!("{at}: min eigenvalue {min:.3e}"));
        }
    }
    verdict(true, "4 arrays".into())
}
