//! Data balancing for discrete joint probability measures.
//!
//! A joint measure on a finite product space `X x Y` is an `m x l` matrix of
//! nonnegative weights. *Balancing* alternately rescales its rows and columns
//! so that the marginals match given targets; the procedure is also known as
//! iterative proportional fitting, raking, or Sinkhorn-Knopp matrix scaling.
//!
//! The crate provides:
//!
//! - [`measure`]: joint measures, marginals, divergences, multinomial sampling;
//! - [`balancing`]: the raking iteration, convergence to the information
//!   projection, and the equivalent KL / reverse-KL / chi-squared projections;
//! - [`spectral`]: conditional-mean operators, their singular value
//!   decomposition, and closed-form variance-reduction predictions for
//!   balanced estimators;
//! - [`estimation`]: balanced / empirical / importance-weighted estimators of
//!   linear functionals and a Monte Carlo MSE harness;
//! - [`synthetic`]: spectrum-controlled test distributions, corrupted target
//!   marginals, and random test functions;
//! - [`contrastive`]: the symmetric contrastive (CLIP-style) loss family
//!   expressed through balancing of a score-derived measure;
//! - [`curation`]: keyword-based corpus curation as a single balancing step,
//!   with resampling-weight export.
//!
//! All numeric code is generic over the scalar type through the [`Real`]
//! trait (`f32` or `f64`); concrete `f64` aliases are exported at the crate
//! root.

#![forbid(unsafe_code)]
// indexed loops over parallel vectors/matrix columns are the clearest way to
// write the weighted-inner-product arithmetic here
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod balancing;
pub mod contrastive;
pub mod curation;
mod error;
pub mod estimation;
mod float;
pub mod io;
pub mod measure;
pub mod rng;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use float::Real;

pub use balancing::{Axis, BalanceOrder, BalanceTrace, Divergence};
pub use measure::{EmpiricalSample, JointMeasure, TargetMarginals, TestFunction};
pub use spectral::{FunctionCoordinates, SpectralDecomposition, VariancePrediction};

/// Tolerance for "sums to one" checks on probability vectors and measures.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// `f64` joint measure.
pub type JointMeasure64 = JointMeasure<f64>;
/// `f64` target marginals.
pub type TargetMarginals64 = TargetMarginals<f64>;
/// `f64` test function.
pub type TestFunction64 = TestFunction<f64>;
/// `f64` balance trace.
pub type BalanceTrace64 = BalanceTrace<f64>;
/// `f64` spectral decomposition.
pub type SpectralDecomposition64 = SpectralDecomposition<f64>;
