//! Experiment configuration files.

use std::path::{Path, PathBuf};

use rmtde_core::channel::{FadingSpec, ScenarioRecipe, ScenarioSpec};
use rmtde_core::det_equiv::SolverOptions;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Default seed when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to a scenario file, an inline scenario, or `{"recipe": {...}}`.
    #[serde(default)]
    pub scenario: Option<Value>,
    /// Grid of `1/σ²` in dB.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    /// Evaluation points `[re, im]` for `solve`.
    #[serde(default)]
    pub z_points: Vec<[f64; 2]>,
    /// One Monte-Carlo curve per fading law in `sweep-snr`.
    #[serde(default)]
    pub fadings: Vec<FadingEntry>,
    /// Fading laws compared by `variance-vs-cv`.
    #[serde(default)]
    pub cv_sweep: Vec<FadingEntry>,
    /// Receive dimensions for `variance-vs-cv`; needs a recipe scenario.
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default = "default_variance_snr")]
    pub variance_snr_db: f64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Report mutual information in bits instead of nats.
    #[serde(default)]
    pub bits: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_variance_snr() -> f64 {
    30.0
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        }
    }
}

/// A fading law, or a log-normal law given by its amplitude CV.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FadingEntry {
    ByCv { family: String, cv: f64 },
    Spec(FadingSpec),
}

impl FadingEntry {
    pub fn resolve(&self) -> CliResult<FadingSpec> {
        let spec = match self {
            FadingEntry::ByCv { family, cv } if family == "lognormal" => FadingSpec::lognormal_with_cv(*cv),
            FadingEntry::ByCv { family, .. } => {
                return Err(CliError::Config(format!(
                    "fading family `{family}` cannot be set by CV; only `lognormal` can"
                )))
            }
            FadingEntry::Spec(s) => s.validate().map(|_| *s),
        };
        spec.map_err(|e| CliError::Config(format!("fading law: {e}")))
    }

    /// File-name friendly name of the law.
    pub fn label(&self) -> String {
        match self {
            FadingEntry::ByCv { family, cv } => format!("{family}-cv{cv}"),
            FadingEntry::Spec(s) => s.label(),
        }
    }
}

/// A scenario fixed by explicit matrices, or a recipe that can be rebuilt at any size.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Fixed(ScenarioSpec),
    Recipe(ScenarioRecipe),
}

impl Scenario {
    pub fn spec(&self) -> CliResult<ScenarioSpec> {
        match self {
            Scenario::Fixed(s) => Ok(s.clone()),
            Scenario::Recipe(r) => r.build().map_err(|e| CliError::Config(format!("scenario recipe: {e}"))),
        }
    }

    /// The scenario at receive dimension `n`, keeping per-antenna ratios.
    pub fn at_size(&self, n: usize) -> CliResult<ScenarioSpec> {
        match self {
            Scenario::Recipe(r) => Scenario::Recipe(r.resized(n)).spec(),
            Scenario::Fixed(s) if s.n_rx == n => Ok(s.clone()),
            Scenario::Fixed(s) => Err(CliError::Config(format!(
                "scenario has fixed N = {}; resizing to N = {n} needs a recipe",
                s.n_rx
            ))),
        }
    }
}

/// Parses a scenario document: explicit matrices, a recipe, or `{"recipe": ...}`.
pub fn parse_scenario(value: &Value) -> CliResult<Scenario> {
    if let Some(inner) = value.get("recipe") {
        return serde_json::from_value::<ScenarioRecipe>(inner.clone())
            .map(Scenario::Recipe)
            .map_err(|e| CliError::Config(format!("scenario recipe: {e}")));
    }
    let explicit = serde_json::from_value::<ScenarioSpec>(value.clone());
    match explicit {
        Ok(spec) => spec
            .normalized()
            .map(Scenario::Fixed)
            .map_err(|e| CliError::Config(format!("scenario: {e}"))),
        Err(explicit_err) => serde_json::from_value::<ScenarioRecipe>(value.clone())
            .map(Scenario::Recipe)
            .map_err(|recipe_err| {
                CliError::Config(format!(
                    "scenario is neither explicit ({explicit_err}) nor a recipe ({recipe_err})"
                ))
            }),
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_scenario_file(path: &Path) -> CliResult<Scenario> {
    parse_scenario(&read_json(path)?).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// A parsed config with its scenario resolved relative to the config file.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub scenario: Option<(String, Scenario)>,
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let config: ExperimentConfig = serde_json::from_value(read_json(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(config, base)
}

pub fn resolve(config: ExperimentConfig, base: &Path) -> CliResult<LoadedConfig> {
    let scenario = match &config.scenario {
        None => None,
        Some(Value::String(file)) => {
            let path = base.join(file);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| file.clone());
            Some((name, load_scenario_file(&path)?))
        }
        Some(inline) => Some(("inline".to_string(), parse_scenario(inline)?)),
    };
    if let Some(t) = config.trials {
        if t == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
    }
    Ok(LoadedConfig { config, scenario })
}

/// `σ² = 10^(−snr_db/10)`.
pub fn sigma2_from_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}
