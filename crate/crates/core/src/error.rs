use thiserror::Error;

/// Errors raised by model construction, solvers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix `{name}` is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { name: String, asymmetry: f64 },

    #[error("matrix `{name}` is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { name: String, min_eigenvalue: f64 },

    #[error("matrix `{0}` has zero trace and cannot be normalized")]
    ZeroTrace(String),

    #[error("line-of-sight components with K > 1 require diagonal receive correlation (user {user} is not diagonal)")]
    LosRequiresDiagonal { user: usize },

    #[error("singular matrix while evaluating {0}")]
    Singular(String),

    #[error("matrix is not positive definite while evaluating {0}")]
    NotPositiveDefinite(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("quadrature did not reach the requested accuracy: {0}")]
    Quadrature(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("covariance optimization failed: {0}")]
    Optimization(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
