//! The five subcommands.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rmtde_core::channel::{cv_of, FadingSpec, ScenarioSpec};
use rmtde_core::covariance::{optimize_covariance, CovarianceOptions};
use rmtde_core::det_equiv::{det_shannon, solve_fixed_point, uniqueness_diagnostic, SolverOptions};
use rmtde_core::monte_carlo::{run_ensemble, EnsembleQuery};

use crate::config::{load_config, resolve, sigma2_from_db, ExperimentConfig, FadingEntry, LoadedConfig, Scenario, DEFAULT_SEED};
use crate::error::{CliError, CliResult};
use crate::plotdata::{emit_plotdata, Table};
use crate::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepSnr,
    VarianceVsCv,
    OptimizeCovariance,
    Validate,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Files written and human-readable summary lines.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Everything a command needs once the config is loaded.
pub struct Context {
    pub config: ExperimentConfig,
    pub scenario: Option<(String, Scenario)>,
    pub out: PathBuf,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Context {
    fn scenario(&self) -> CliResult<(&str, ScenarioSpec)> {
        let (name, scenario) = self
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no `scenario`".into()))?;
        Ok((name, scenario.spec()?))
    }

    fn units(&self) -> (f64, &'static str) {
        if self.config.bits {
            (std::f64::consts::LN_2, "bits")
        } else {
            (1.0, "nats")
        }
    }
}

pub fn context(opts: &RunOptions) -> CliResult<Context> {
    let LoadedConfig { config, scenario } = match &opts.config {
        Some(path) => load_config(path)?,
        None => resolve(ExperimentConfig::default(), Path::new("."))?,
    };
    let out = opts
        .out
        .clone()
        .or_else(|| config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("rmtde-out"));
    let seed = opts.seed.or(config.master_seed).unwrap_or(DEFAULT_SEED);
    let solver = config.solver.options();
    Ok(Context {
        config,
        scenario,
        out,
        seed,
        solver,
    })
}

pub fn run(command: Command, opts: &RunOptions) -> CliResult<Report> {
    if opts.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let ctx = context(opts)?;
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(command, &ctx)),
        None => dispatch(command, &ctx),
    }
}

fn dispatch(command: Command, ctx: &Context) -> CliResult<Report> {
    match command {
        Command::Solve => solve(ctx),
        Command::SweepSnr => sweep_snr(ctx),
        Command::VarianceVsCv => variance_vs_cv(ctx),
        Command::OptimizeCovariance => optimize(ctx),
        Command::Validate => validate::run(ctx),
    }
}

fn solve(ctx: &Context) -> CliResult<Report> {
    let (name, spec) = ctx.scenario()?;
    let points: Vec<Complex64> = if ctx.config.z_points.is_empty() {
        vec![Complex64::new(-1.0, 0.0)]
    } else {
        ctx.config.z_points.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
    };
    let mut table = Table::new(&[
        "z_re",
        "z_im",
        "user",
        "e_re",
        "e_im",
        "e_tilde_re",
        "e_tilde_im",
        "stieltjes_re",
        "stieltjes_im",
        "shannon",
        "spectral_radius",
        "iterations",
        "residual",
    ]);
    let mut summary = Vec::new();
    for z in points {
        let at = format!("scenario `{name}`, z = {z}");
        let result = solve_fixed_point(&spec, z, &ctx.solver).map_err(|e| CliError::from_core(&at, e))?;
        result.require_converged().map_err(|e| CliError::from_core(&at, e))?;
        let rho = uniqueness_diagnostic(&spec, &result)
            .map_err(|e| CliError::from_core(&at, e))?
            .spectral_radius;
        let shannon = if z.im == 0.0 && !spec.has_interference() {
            Some(det_shannon(&spec, -z.re, &ctx.solver).map_err(|e| CliError::from_core(&at, e))? / ctx.units().0)
        } else {
            None
        };
        let st = &result.state;
        for k in 0..spec.num_users() {
            table.push(vec![
                z.re.into(),
                z.im.into(),
                k.into(),
                st.e[k].re.into(),
                st.e[k].im.into(),
                st.e_tilde[k].re.into(),
                st.e_tilde[k].im.into(),
                result.stieltjes.re.into(),
                result.stieltjes.im.into(),
                shannon.into(),
                rho.into(),
                st.iterations.into(),
                st.residual.into(),
            ]);
            summary.push(format!("z = {z}  user {k}: e = {}  e_tilde = {}", st.e[k], st.e_tilde[k]));
        }
        summary.push(format!(
            "z = {z}  stieltjes = {}  spectral radius = {rho:.6}  iterations = {}",
            result.stieltjes, st.iterations
        ));
    }
    let files = emit_plotdata(&ctx.out, &[("solve".to_string(), table)])?;
    Ok(Report { files, summary })
}

fn require_grid(ctx: &Context) -> CliResult<&[f64]> {
    let grid = &ctx.config.snr_db;
    if grid.is_empty() {
        return Err(CliError::Config("`snr_db` must list at least one value".into()));
    }
    if let Some(bad) = grid.iter().find(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("snr_db value {bad} is not finite")));
    }
    Ok(grid)
}

fn resolve_all(entries: &[FadingEntry]) -> CliResult<Vec<(String, FadingSpec)>> {
    let mut out: Vec<(String, FadingSpec)> = Vec::with_capacity(entries.len());
    for entry in entries {
        let label = entry.label();
        if out.iter().any(|(l, _)| *l == label) {
            return Err(CliError::Config(format!("fading law `{label}` listed twice")));
        }
        out.push((label, entry.resolve()?));
    }
    Ok(out)
}

fn sweep_snr(ctx: &Context) -> CliResult<Report> {
    let (name, spec) = ctx.scenario()?;
    let grid = require_grid(ctx)?;
    let (unit, unit_name) = ctx.units();
    let sigma2: Vec<f64> = grid.iter().map(|&db| sigma2_from_db(db)).collect();
    let de = grid
        .iter()
        .zip(&sigma2)
        .map(|(db, &s2)| {
            det_shannon(&spec, s2, &ctx.solver)
                .map(|v| v / unit)
                .map_err(|e| CliError::from_core(format!("scenario `{name}`, snr_db = {db}"), e))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let curves: Vec<(String, ScenarioSpec)> = if ctx.config.fadings.is_empty() {
        vec![("scenario".to_string(), spec.clone())]
    } else {
        resolve_all(&ctx.config.fadings)?
            .into_iter()
            .map(|(label, f)| (label, spec.with_fading(f)))
            .collect()
    };
    let de_column = format!("de_{unit_name}");
    let header = ["snr_db", de_column.as_str(), "mc_mean", "mc_std", "trials"];
    let mut tables = Vec::with_capacity(curves.len());
    let mut summary = Vec::new();
    for (label, curve) in &curves {
        let mc = match ctx.config.trials {
            Some(trials) => Some(
                run_ensemble(curve, &EnsembleQuery::MutualInfo(sigma2.clone()), trials, ctx.seed)
                    .map_err(|e| CliError::from_core(format!("scenario `{name}`, fading {label}"), e))?,
            ),
            None => None,
        };
        let mut table = Table::new(&header);
        for (i, &db) in grid.iter().enumerate() {
            let point = mc.as_ref().map(|r| r.points[i]);
            table.push(vec![
                db.into(),
                de[i].into(),
                point.map(|p| p.mean.re / unit).into(),
                point.map(|p| p.std() / unit).into(),
                mc.as_ref().map(|r| r.trials).into(),
            ]);
        }
        summary.push(format!("{label}: {} grid points", grid.len()));
        tables.push((format!("sweep_snr_{label}"), table));
    }
    let files = emit_plotdata(&ctx.out, &tables)?;
    Ok(Report { files, summary })
}

fn default_cv_sweep() -> Vec<FadingEntry> {
    vec![
        FadingEntry::Spec(FadingSpec::ComplexGaussian),
        FadingEntry::Spec(FadingSpec::Nakagami { m: 0.6 }),
        FadingEntry::ByCv {
            family: "lognormal".into(),
            cv: 1.0,
        },
    ]
}

fn variance_vs_cv(ctx: &Context) -> CliResult<Report> {
    let (name, base) = ctx.scenario()?;
    let trials = ctx
        .config
        .trials
        .ok_or_else(|| CliError::Config("variance-vs-cv needs `trials`".into()))?;
    let scenario = &ctx.scenario.as_ref().expect("scenario checked above").1;
    let entries = if ctx.config.cv_sweep.is_empty() {
        default_cv_sweep()
    } else {
        ctx.config.cv_sweep.clone()
    };
    let laws = resolve_all(&entries)?;
    let sizes = if ctx.config.n_values.is_empty() {
        vec![base.n_rx]
    } else {
        ctx.config.n_values.clone()
    };
    if sizes.contains(&0) {
        return Err(CliError::Config("n_values must be positive".into()));
    }
    let sigma2 = sigma2_from_db(ctx.config.variance_snr_db);
    let unit = ctx.units().0;
    let mut tables = Vec::with_capacity(sizes.len());
    let mut summary = Vec::new();
    for &n in &sizes {
        let spec = scenario.at_size(n)?;
        let mut table = Table::new(&["cv", "fading_family", "N", "empirical_variance", "mean"]);
        for (label, law) in &laws {
            let at = format!("scenario `{name}`, N = {n}, fading {label}");
            let cv = cv_of(law).map_err(|e| CliError::from_core(&at, e))?;
            let result = run_ensemble(&spec.with_fading(*law), &EnsembleQuery::MutualInfo(vec![sigma2]), trials, ctx.seed)
                .map_err(|e| CliError::from_core(&at, e))?;
            let p = result.points[0];
            table.push(vec![
                cv.into(),
                law.family().into(),
                n.into(),
                (p.variance / (unit * unit)).into(),
                (p.mean.re / unit).into(),
            ]);
        }
        summary.push(format!("N = {n}: {} fading laws", laws.len()));
        tables.push((format!("variance_vs_cv_N{n}"), table));
    }
    let files = emit_plotdata(&ctx.out, &tables)?;
    Ok(Report { files, summary })
}

fn optimize(ctx: &Context) -> CliResult<Report> {
    let (name, spec) = ctx.scenario()?;
    let grid = require_grid(ctx)?;
    let unit = ctx.units().0;
    let opts = CovarianceOptions {
        solver: ctx.solver,
        ..CovarianceOptions::default()
    };
    let mut rates = Table::new(&["snr_db", "rate_optimal", "rate_uniform", "iterations"]);
    let mut powers = Table::new(&["snr_db", "user", "mode", "t_eigenvalue", "power"]);
    let mut trajectory = Table::new(&["snr_db", "iteration", "rate"]);
    let mut summary = Vec::new();
    for &db in grid {
        let solution = optimize_covariance(&spec, sigma2_from_db(db), &opts)
            .map_err(|e| CliError::from_core(format!("scenario `{name}`, snr_db = {db}"), e))?;
        rates.push(vec![
            db.into(),
            (solution.rate / unit).into(),
            (solution.rate_trajectory[0] / unit).into(),
            solution.iterations.into(),
        ]);
        for (k, (values, p)) in solution.t_eigenvalues.iter().zip(&solution.powers).enumerate() {
            for (j, (&lambda, &pj)) in values.iter().zip(p).enumerate() {
                powers.push(vec![db.into(), k.into(), j.into(), lambda.into(), pj.into()]);
            }
        }
        for (i, &r) in solution.rate_trajectory.iter().enumerate() {
            trajectory.push(vec![db.into(), i.into(), (r / unit).into()]);
        }
        summary.push(format!(
            "snr_db = {db}: optimal {:.6}, uniform {:.6}, {} iterations",
            solution.rate / unit,
            solution.rate_trajectory[0] / unit,
            solution.iterations
        ));
    }
    let files = emit_plotdata(
        &ctx.out,
        &[
            ("covariance_rates".to_string(), rates),
            ("covariance_powers".to_string(), powers),
            ("covariance_trajectory".to_string(), trajectory),
        ],
    )?;
    Ok(Report { files, summary })
}
