//! Numerical laboratory for the non-local energies
//!
//! ```text
//! Λ_δ(u, I) = ∫_I ∫_I φ_δ(|u(x) - u(y)|) / |x - y|^{p+1} dx dy,   φ_δ(t) = δ^p φ(t/δ),
//! ```
//!
//! their recovery sequences, and the limit constants `κ` (target `U(x) = x`)
//! and `γ` (target a unit step, `p = 1`).
//!
//! The core is generic over the scalar type via [`Real`]; the aliases at the
//! crate root fix it to `f64`, which is what the CLI and the acceptance suite use.

pub mod error;
pub mod evaluator;
pub mod gamma;
pub mod gridfn;
pub mod invariants;
pub mod profile;
pub mod quad;
pub mod real;
pub mod recovery;

pub use error::{LabError, Result};
pub use real::Real;

/// Version string embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Profile = profile::PhiProfile<f64>;
pub type Table = profile::Table<f64>;
pub type Interval = gridfn::Interval<f64>;
pub type PlFn = gridfn::PiecewiseLinearFn<f64>;
pub type FlattenSpec = gridfn::FlattenSpec<f64>;
pub type QuadConfig = evaluator::QuadConfig<f64>;
pub type EnergyValue = evaluator::EnergyValue<f64>;
pub type TilingPlan = recovery::TilingPlan<f64>;
pub type OptimizerConfig = gamma::OptimizerConfig<f64>;
pub type KappaEstimate = gamma::ConstantEstimate<f64>;
pub type GammaEstimate = gamma::ConstantEstimate<f64>;
pub type ConvergenceScan = gamma::ConvergenceScan<f64>;
pub type ProbeReport = gamma::ProbeReport<f64>;
