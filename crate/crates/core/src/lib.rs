//! Spectral estimation of the Lévy density of a compound Poisson process
//! observed at equispaced times.
//!
//! The pipeline runs from increments to an estimate of `ν = λμ`:
//! empirical characteristic function, intensity estimate from the zero
//! increments, distinguished logarithm by phase unwrapping, a band-limited
//! smoothing operator (flat-top convolution or Meyer projection) and a
//! single inverse FFT. Bandwidth is fixed, set from the oracle rate, or
//! chosen by Lepskii's method. The [`risk`] module holds the Monte Carlo
//! harness used to check rates and robustness.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod fourier;
pub mod io;
pub mod lepskii;
pub mod model;
pub mod numerics;
pub mod operators;
pub mod risk;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{DensityEstimate, EstimatorConfig, GridPlan};
pub use lepskii::{LepskiiConfig, SelectionTrace, Tau};
pub use model::{CompoundPoissonModel, IncrementSample, JumpDensity};
pub use numerics::Norm;
pub use operators::{OperatorKind, OperatorSpec};
