//! Dense complex linear-algebra helpers shared by the model, solver and simulator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

/// Relative eigenvalue floor below which a Hermitian matrix is rejected as indefinite.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Lifts a real matrix into the complex field.
pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_diagonal(d: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Squared Frobenius norm, i.e. `tr(A Aᴴ)`.
pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_zero(m: &CMat) -> bool {
    m.iter().all(|z| *z == Complex64::new(0.0, 0.0))
}

pub fn is_diagonal(m: &CMat) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != Complex64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// `‖A − Aᴴ‖_F / max(‖A‖_F, tiny)`.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    let norm = frobenius_sq(m).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let diff = m - m.adjoint();
    frobenius_sq(&diff).sqrt() / norm
}

/// Averages a numerically Hermitian matrix with its adjoint.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn spectral_norm_hermitian(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Checks that `m` is square, Hermitian and positive semidefinite up to [`PSD_TOLERANCE`].
pub fn check_hermitian_psd(name: &str, m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "`{name}` must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = hermitian_asymmetry(m);
    if asym > PSD_TOLERANCE {
        return Err(Error::NotHermitian {
            name: name.to_string(),
            asymmetry: asym,
        });
    }
    let eigs = hermitian_eigenvalues(m);
    let (Some(&min), Some(&max)) = (eigs.first(), eigs.last()) else {
        return Ok(());
    };
    let scale = min.abs().max(max.abs());
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPsd {
            name: name.to_string(),
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Principal square root of a Hermitian PSD matrix; tiny negative eigenvalues are clamped.
pub fn psd_sqrt(m: &CMat) -> CMat {
    if is_diagonal(m) {
        return CMat::from_diagonal(&m.diagonal().map(|z| c(z.re.max(0.0).sqrt(), 0.0)));
    }
    let (values, vectors) = hermitian_eigen(m);
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let scaled = &vectors * real_diagonal(&roots);
    hermitize(&(scaled * vectors.adjoint()))
}

pub fn inverse(m: &CMat, context: &str) -> Result<CMat> {
    let lu = m.clone().lu();
    lu.try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular(context.to_string()))
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, falling back to LU
/// when the factorization fails numerically.
pub fn inverse_hpd(m: &CMat, context: &str) -> Result<CMat> {
    match cholesky_hpd(m) {
        Some(chol) => Ok(hermitize(&chol.inverse())),
        None => inverse(m, context),
    }
}

/// `log det(M)` for a Hermitian positive-definite `M`, from its Cholesky factor.
pub fn logdet_hpd(m: &CMat, context: &str) -> Result<f64> {
    let chol = cholesky_hpd(m).ok_or_else(|| Error::NotPositiveDefinite(context.to_string()))?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Complex Cholesky takes square roots of negative pivots silently, so the pivots are
/// checked to be real and positive.
fn cholesky_hpd(m: &CMat) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = hermitize(m).cholesky()?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// Block-diagonal assembly of square blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, offset), (b.nrows(), b.ncols()))
            .copy_from(b);
        offset += b.nrows();
    }
    out
}

/// Largest eigenvalue modulus of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}
