//! Deterministic equivalents of the Stieltjes and Shannon transforms for K-user
//! correlated MIMO multiple-access channels with non-Gaussian fading, and the
//! Monte-Carlo machinery that validates them.

pub mod channel;
pub mod covariance;
pub mod det_equiv;
pub mod error;
pub mod linalg;
pub mod monte_carlo;
pub mod quadrature;
pub mod seed;

pub use error::{Error, Result};
