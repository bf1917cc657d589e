//! Radial-weight point processes: modulus laws, hybrid and Poisson sampling,
//! annular cell counting, Bernoulli-sum bounds and separation experiments.

// `!(x > 0.0)` is the NaN-rejecting form used throughout for parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod interp;
pub mod kernel;
pub mod prob;
pub mod quadrature;
pub mod radial_law;
pub mod report;
pub mod sampler;
pub mod scalar;
pub mod verify;
pub mod weight;

pub use error::{Error, Result};
pub use grid::{AnnularGrid, CellCounts};
pub use radial_law::{ModulusLaw, RadialModel};
pub use sampler::{HybridSampler, Point, PointSample, PoissonSampler, SampleKind};
pub use scalar::Real;
pub use weight::{RadialWeight, RhoSolverConfig, Verdict, WeightSpec};

/// Probability mass function in double precision.
pub type Pmf = prob::Pmf<f64>;
/// Poisson masses with their truncated tail in double precision.
pub type TruncatedPoisson = prob::TruncatedPoisson<f64>;
/// Quadrature estimate in double precision.
pub type Estimate = quadrature::Estimate<f64>;
/// Monotone cubic interpolant in double precision.
pub type Pchip = interp::Pchip<f64>;
