//! Spectral simulation and Monte Carlo verification toolkit for the
//! conservative stochastic Cahn-Hilliard equation with penalized reflection
//! on `[0, 1]` with Neumann boundary conditions.
//!
//! The crate is organized around the cosine spectral representation of the
//! dynamics: [`spectral`] provides the basis and the diagonal operators,
//! [`measures`] the exact Gaussian samplers for the invariant laws,
//! [`solver`] the exponential-Euler integrator of the penalized equation,
//! [`meander`] the Brownian meander path constructions, [`ibp`] the Monte
//! Carlo checks of the integration-by-parts identities, and [`limit`] the
//! vanishing-penalization sweep.

pub mod error;
pub mod functional;
pub mod ibp;
pub mod limit;
pub mod meander;
pub mod measures;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::CoreError;
pub use spectral::{Field, GridSpec};
