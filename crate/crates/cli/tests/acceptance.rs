//! Acceptance criteria AC-1 to AC-10, one PASS/FAIL line each.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rmtde_cli::config::{sigma2_from_db, Scenario};
use rmtde_cli::scenarios::{shipped, shipped_by_name};
use rmtde_core::channel::{FadingSpec, ScenarioSpec, UserSpec};
use rmtde_core::covariance::{optimize_covariance, CovarianceOptions};
use rmtde_core::det_equiv::{
    det_shannon, det_stieltjes, moment_identity, shannon_derivative, shannon_via_integral, solve_fixed_point,
    uniqueness_diagnostic, IntegralOptions, SolverOptions,
};
use rmtde_core::linalg::{frobenius_sq, identity, real_diagonal, trace, CMat};
use rmtde_core::monte_carlo::{distribution_gap, run_ensemble, EnsembleQuery};

type Verdict = (bool, String);

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

fn specs() -> Vec<(String, ScenarioSpec)> {
    shipped()
        .expect("shipped scenarios parse")
        .into_iter()
        .map(|(name, s)| {
            let spec = s.spec().expect("shipped scenarios build");
            (name, spec)
        })
        .collect()
}

fn lognormal_cv1() -> FadingSpec {
    FadingSpec::lognormal_with_cv(1.0).unwrap()
}

/// Root of `c z m² − (1 − c − z) m + 1 = 0` that is positive for `z < 0`.
fn marchenko_pastur(c: f64, z: f64) -> f64 {
    let b = 1.0 - c - z;
    (b - (b * b - 4.0 * c * z).sqrt()) / (2.0 * c * z)
}

fn ac1() -> Verdict {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let mut worst = 0.0_f64;
    let mut at_one = f64::NAN;
    for beta in [0.5, 1.0, 2.0] {
        let n_rx = 16;
        let n = (n_rx as f64 / beta) as usize;
        let m = det_stieltjes(&iid(n_rx, n, FadingSpec::ComplexGaussian), Complex64::new(-1.0, 0.0), &opts).unwrap();
        worst = worst.max((m - marchenko_pastur(beta, -1.0)).norm());
        if beta == 1.0 {
            at_one = (m.re - (5f64.sqrt() - 1.0) / 2.0).abs().max(m.im.abs());
        }
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-6 && at_one <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max |m - MP| = {worst:.2e}, |m - golden| = {at_one:.2e}, {elapsed:.2?}"),
    )
}

fn ac2() -> Verdict {
    let start = Instant::now();
    let base = shipped_by_name("fig2_ula").unwrap().spec().unwrap();
    let grid: Vec<f64> = (0..=6).map(|i| 5.0 * i as f64).collect();
    let sigma2: Vec<f64> = grid.iter().map(|&db| sigma2_from_db(db)).collect();
    let opts = SolverOptions::default();
    let de: Vec<f64> = sigma2.iter().map(|&s| det_shannon(&base, s, &opts).unwrap()).collect();
    let trials = 2000;
    let mut ok = true;
    let mut parts = Vec::new();
    for fading in [FadingSpec::ComplexGaussian, lognormal_cv1(), FadingSpec::Nakagami { m: 0.6 }] {
        let mc = run_ensemble(&base.with_fading(fading), &EnsembleQuery::MutualInfo(sigma2.clone()), trials, 2024).unwrap();
        let mut worst = 0.0_f64;
        let mut failing = Vec::new();
        for ((db, d), p) in grid.iter().zip(&de).zip(&mc.points) {
            let bound = (3.0 * p.std() / (trials as f64).sqrt()).max(0.02 * d);
            let diff = (p.mean.re - d).abs();
            worst = worst.max(diff / bound);
            if diff > bound {
                failing.push(format!("{db}dB"));
            }
        }
        ok &= failing.is_empty();
        parts.push(format!(
            "{} max |mc-de|/tol = {worst:.2}{}",
            fading.label(),
            if failing.is_empty() { String::new() } else { format!(" (fails at {})", failing.join(" ")) }
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    (ok, format!("{}; {elapsed:.2?}", parts.join("; ")))
}

fn ac3() -> Verdict {
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut worst_trace = 0.0_f64;
    let mut worst_probe = 0.0_f64;
    for (name, spec) in specs() {
        let k = spec.num_users() as f64;
        let expected = if spec.has_los() { 2.0 * k } else { k };
        let n = spec.n_rx as f64;
        let direct: f64 = spec
            .users
            .iter()
            .map(|u| (trace(&u.r).re * trace(&u.t).re / u.n as f64 + frobenius_sq(&u.hbar)) / n)
            .sum();
        let m = moment_identity(&spec, &opts).unwrap();
        let trace_err = (m.trace_formula - expected).abs().max((direct - expected).abs());
        let probe_err = (m.probe - expected).abs() / expected;
        worst_trace = worst_trace.max(trace_err);
        worst_probe = worst_probe.max(probe_err);
        if trace_err > 1e-10 || probe_err > 1e-3 {
            ok = false;
            eprintln!("AC-3 {name}: trace error {trace_err:.2e}, probe error {probe_err:.2e}");
        }
    }
    (ok, format!("max trace error {worst_trace:.2e}, max probe relative error {worst_probe:.2e}"))
}

fn ac4() -> Verdict {
    let tight = SolverOptions::default().with_tol(1e-14);
    let mut worst = f64::INFINITY;
    for (name, spec) in specs() {
        for s2 in [0.5, 1.0, 2.0, 5.0] {
            let exact = shannon_derivative(&spec, s2, &tight).unwrap();
            let err = |h: f64| {
                let up = det_shannon(&spec, s2 + h, &tight).unwrap();
                let down = det_shannon(&spec, s2 - h, &tight).unwrap();
                ((up - down) / (2.0 * h) - exact).abs()
            };
            let ratio = err(1e-2) / err(5e-3);
            if ratio < worst {
                worst = ratio;
            }
            if ratio < 3.5 {
                eprintln!("AC-4 {name} sigma2 = {s2}: ratio {ratio:.3}");
            }
        }
    }
    (worst >= 3.5, format!("min error ratio {worst:.3} over shipped scenarios"))
}

fn ac5() -> Verdict {
    let opts = SolverOptions::default();
    let iopts = IntegralOptions::default();
    let mut worst = 0.0_f64;
    for (_, spec) in specs() {
        for s2 in [0.01, 0.1, 1.0, 10.0] {
            let closed = det_shannon(&spec, s2, &opts).unwrap();
            let via = shannon_via_integral(&spec, s2, &iopts).unwrap();
            worst = worst.max((via - closed).abs() / closed);
        }
    }
    (worst <= 1e-3, format!("max relative difference {worst:.2e}"))
}

fn ac6() -> Verdict {
    let opts = SolverOptions::default();
    let mut rho = 0.0_f64;
    let mut margin = f64::INFINITY;
    let mut solves = 0;
    let points = [-0.01, -0.1, -1.0, -10.0]
        .map(|x| Complex64::new(x, 0.0))
        .into_iter()
        .chain([Complex64::new(-0.2, 0.4), Complex64::new(1.0, 0.5)]);
    let points: Vec<Complex64> = points.collect();
    for (_, spec) in specs() {
        for &z in &points {
            let r = solve_fixed_point(&spec, z, &opts).unwrap();
            assert!(r.state.converged);
            let d = uniqueness_diagnostic(&spec, &r).unwrap();
            rho = rho.max(d.spectral_radius);
            margin = margin.min(d.min_margin());
            solves += 1;
        }
    }
    (
        rho < 1.0 && margin > 0.0,
        format!("{solves} solves, max spectral radius {rho:.4}, min margin {margin:.4}"),
    )
}

fn ac7() -> Verdict {
    let z = Complex64::new(-1.0, 0.0);
    let small = distribution_gap(&iid(8, 8, lognormal_cv1()), z, 5000, 77).unwrap();
    let large = distribution_gap(&iid(32, 32, lognormal_cv1()), z, 5000, 77).unwrap();
    (
        large.gap < small.gap && large.gap <= 3.0 * large.stderr + 0.01,
        format!(
            "gap(8) = {:.4e} (stderr {:.1e}), gap(32) = {:.4e} (stderr {:.1e})",
            small.gap, small.stderr, large.gap, large.stderr
        ),
    )
}

fn ac8() -> Verdict {
    let Some(scenario @ Scenario::Recipe(_)) = shipped_by_name("fig2_ula") else {
        return (false, "fig2_ula is not a recipe".into());
    };
    let query = EnsembleQuery::MutualInfo(vec![sigma2_from_db(30.0)]);
    let mut ok = true;
    let mut parts = Vec::new();
    for fading in [FadingSpec::ComplexGaussian, FadingSpec::Nakagami { m: 0.6 }, lognormal_cv1()] {
        let variance = |n: usize| {
            let spec = scenario.at_size(n).unwrap().with_fading(fading);
            run_ensemble(&spec, &query, 2000, 31).unwrap().points[0].variance
        };
        let (v4, v16) = (variance(4), variance(16));
        ok &= v16 < v4;
        parts.push(format!("{} {v4:.3e} -> {v16:.3e}", fading.label()));
    }
    (ok, parts.join("; "))
}

fn ac9() -> Verdict {
    let opts = CovarianceOptions::default();
    let angle = 0.6_f64;
    let u = CMat::from_fn(2, 2, |i, j| {
        let phase = Complex64::from_polar(1.0, 0.3 * (i as f64 - j as f64));
        let v = match (i, j) {
            (0, 0) | (1, 1) => angle.cos(),
            (0, 1) => -angle.sin(),
            _ => angle.sin(),
        };
        phase * v
    });
    let with_t = |t: CMat, n_rx: usize| {
        let mut spec = iid(n_rx, t.nrows(), FadingSpec::ComplexGaussian);
        spec.users[0].t = t;
        spec
    };
    let rotated = |d: [f64; 2]| {
        let m = &u * real_diagonal(&d) * u.adjoint();
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (n_rx, s2) in [(2, 1.0), (2, 0.1), (3, 0.5)] {
        let sol = optimize_covariance(&with_t(rotated([0.5, 1.5]), n_rx), s2, &opts).unwrap();
        let (best_p, best_rate) = (0..=2000)
            .map(|i| {
                let p = i as f64 * 1e-3;
                let spec = with_t(rotated([0.5 * (2.0 - p), 1.5 * p]), n_rx);
                (p, det_shannon(&spec, s2, &SolverOptions::default()).unwrap())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let dp = (sol.powers[0][1] - best_p).abs();
        let dr = sol.rate - best_rate;
        ok &= dp <= 1e-3 && (-1e-9..=1e-5).contains(&dr);
        parts.push(format!("N={n_rx} s2={s2}: |dp| {dp:.1e}, rate-grid {dr:.1e}"));
    }
    let uniform = optimize_covariance(&with_t(identity(3), 4), 0.5, &opts).unwrap();
    let exact_uniform = uniform.powers[0] == vec![1.0; 3] && uniform.q[0] == identity(3);
    ok &= exact_uniform;
    parts.push(format!("identity T uniform exactly: {exact_uniform}"));
    let base = shipped_by_name("fig2_ula").unwrap().spec().unwrap();
    let a = optimize_covariance(&base.with_fading(FadingSpec::ComplexGaussian), 0.1, &opts).unwrap();
    let b = optimize_covariance(&base.with_fading(lognormal_cv1()), 0.1, &opts).unwrap();
    let invariant = a.q == b.q && a.rate == b.rate;
    ok &= invariant;
    parts.push(format!("fading swap invariant: {invariant}"));
    (ok, parts.join("; "))
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn ac10() -> Verdict {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs: [(&str, Option<&str>); 5] = [
        ("solve", Some("solve.json")),
        ("sweep-snr", Some("fig2_sweep.json")),
        ("variance-vs-cv", Some("variance_vs_cv.json")),
        ("optimize-covariance", Some("covariance.json")),
        ("validate", None),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (command, config) in runs {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = tmp.path().join(format!("{command}-{attempt}"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_rmtde"));
            cmd.arg(command).arg("--out").arg(&out).args(["--seed", "11", "--threads", "2"]);
            if let Some(c) = config {
                cmd.arg("--config").arg(configs.join(c));
            }
            let status = cmd.output().unwrap();
            if !status.status.success() {
                eprintln!("AC-10 {command}: {}", String::from_utf8_lossy(&status.stderr));
            }
            outputs.push((status.status.code(), files_of(&out)));
        }
        let same = outputs[0] == outputs[1] && !outputs[0].1.is_empty();
        ok &= same;
        parts.push(format!("{command} {}", if same { "identical" } else { "differs" }));
    }
    (ok, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
        ("AC-9", ac9),
        ("AC-10", ac10),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = match std::panic::catch_unwind(check) {
            Ok(v) => v,
            Err(e) => (
                false,
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()),
            ),
        };
        if !ok {
            failed += 1;
        }
        println!("{name} {} {detail}", if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} of 10 acceptance criteria failed");
        std::process::exit(1);
    }
}
