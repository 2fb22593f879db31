//! Estimation of a spatially varying diffusivity from discretely observed
//! reflected diffusions on a bounded domain.
//!
//! The crate covers the full pipeline: reflected Euler simulation, Daubechies
//! wavelet bases restricted to an interior region, the truncated least-squares
//! estimator, proxy Gaussian likelihoods and geodesic distances, Gaussian
//! priors with a preconditioned Crank-Nicolson sampler, and a small harness
//! for Monte Carlo rate studies.

pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod likelihood;
pub mod model;
pub mod prior;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
pub use geometry::{NestedRegions, Shape};
pub use model::field::DiffusivityField;
