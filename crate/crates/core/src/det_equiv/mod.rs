//! Deterministic equivalents of the Stieltjes and Shannon transforms.

mod moments;
mod shannon;
mod solver;
mod uniqueness;

pub use moments::{first_moment, moment_identity, MomentIdentity, PROBE_HEIGHT};
pub use shannon::{det_shannon, shannon_derivative, shannon_via_integral, IntegralOptions};
pub use solver::{det_stieltjes, solve_fixed_point, DetEquivResult, FixedPointState, SolverOptions};
pub use uniqueness::{uniqueness_diagnostic, UniquenessDiagnostic};

pub(crate) use shannon::shannon_from;
pub(crate) use solver::{solve_model, Model};
