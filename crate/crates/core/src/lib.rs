//! Power approximation for peak detection in smooth isotropic Gaussian
//! random fields.
//!
//! The expected number of local maxima above a threshold, `E[M_u]`, is an
//! upper bound on the probability that at least one peak of the observed
//! field exceeds `u`. This crate evaluates `E[M_u]` in closed form (up to
//! one-dimensional quadratures) for fields in one, two and three
//! dimensions, checks it against Monte Carlo simulation of smoothed white
//! noise, and estimates the required noise and signal parameters from
//! multi-subject image stacks.
//!
//! Modules:
//! - [`model`]: covariance, mean, domain and query types
//! - [`specfun`]: normal distribution functions, bivariate normal CDF and
//!   adaptive quadrature
//! - [`emu`]: the Kac–Rice integrals, thresholds and power curves
//! - [`randfield`]: field synthesis, peak counting and GOI sampling
//! - [`estimate`]: standardization, kernel recovery and mean fitting
//! - [`cli`]: command implementations behind the `peakpower` binary

pub mod cli;
pub mod emu;
pub mod error;
pub mod estimate;
pub mod model;
pub mod randfield;
pub mod specfun;

pub use error::{Error, Result};
