//! Numerical quadrature: Gauss–Hermite rules and adaptive Gauss–Kronrod integration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{-x²} dx`, via Golub–Welsch.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Expectation of `f(θ)` for `θ ~ Normal(mean, std)` with a Gauss–Hermite rule.
pub fn gaussian_expectation<T, F>(nodes: &[f64], weights: &[f64], mean: f64, std: f64, mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: FnMut(f64) -> T,
{
    let scale = std::f64::consts::SQRT_2 * std;
    let norm = 1.0 / std::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(weights)
        .fold(T::default(), |acc, (&x, &w)| acc + f(mean + scale * x) * (w * norm))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Segment { a, b, value, error })
}

/// Globally adaptive G7–K15 integration of a fallible integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("integration bounds must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![kronrod15(&mut f, a, b)?];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} after {} subintervals",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        segments.push(kronrod15(&mut f, seg.a, mid)?);
        segments.push(kronrod15(&mut f, mid, seg.b)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integrates_even_moments() {
        let (x, w) = gauss_hermite(64);
        // E[θ²] = 1, E[θ⁴] = 3 for a standard normal.
        let m2: f64 = gaussian_expectation(&x, &w, 0.0, 1.0, |t| t * t);
        let m4: f64 = gaussian_expectation(&x, &w, 0.0, 1.0, |t| t.powi(4));
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        let total: f64 = w.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hermite_matches_characteristic_function() {
        let (x, w) = gauss_hermite(64);
        // E[cos(tθ)] = exp(-t²σ²/2)
        let v: f64 = gaussian_expectation(&x, &w, 0.0, 0.7, |t| (2.0 * t).cos());
        assert!((v - (-2.0_f64 * 0.49).exp()).abs() < 1e-13);
    }

    #[test]
    fn kronrod_integrates_smooth_functions() {
        let v = integrate(|x| Ok(x.exp()), 0.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = integrate(|x| Ok(1.0 / (1.0 + x * x)), -50.0, 50.0, QuadratureOptions::default())
            .unwrap();
        assert!((v - 2.0 * 50f64.atan()).abs() < 1e-9);
    }

    #[test]
    fn kronrod_reports_failure() {
        let opts = QuadratureOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let r = integrate(|x| Ok((1.0 / x.max(1e-300)).sin()), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn kronrod_propagates_integrand_errors() {
        let r = integrate(
            |_| Err(Error::InvalidParameter("boom".into())),
            0.0,
            1.0,
            QuadratureOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
