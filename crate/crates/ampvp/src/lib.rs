//! Approximate message passing under Gaussian random matrices with a general variance
//! profile: iterations, leave-out variants, high-dimensional state evolution, matrix
//! trace diagnostics, ridge fixed-point theory and a Monte Carlo harness.
//!
//! Numerical code is generic over [`scalar::Scalar`] (`f32` or `f64`); the aliases below
//! fix the usual double-precision choice.

pub mod amp;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod nonlinearity;
pub mod quadrature;
pub mod ridge;
pub mod rng;
pub mod scalar;
pub mod state_evolution;
pub mod trace_diag;

pub use error::{AmpError, Result};
pub use scalar::Scalar;

/// Library version, echoed into result manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Real = f64;
pub type Profile = ensembles::VarianceProfile<Real>;
pub type Matrix = ensembles::SampledMatrix<Real>;
pub type Schedule = nonlinearity::NonlinearitySchedule<Real>;
pub type Trajectory = amp::AmpTrajectory<Real>;
pub type AsymTrajectory = amp::AsymTrajectory<Real>;
pub type StatePath = state_evolution::SePath<Real>;
pub type AsymStatePath = state_evolution::AsymSePath<Real>;
pub type FixedPoint = ridge::RidgeFixedPoint<Real>;
pub type Ridge = ridge::RidgeProblem<Real>;
