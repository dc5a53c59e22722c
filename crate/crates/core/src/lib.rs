//! Pseudospectral simulation of the 2D stochastic second-grade fluid
//! equations and their Navier–Stokes limit on a periodic square, with the
//! Monte Carlo machinery to study the vanishing-alpha limit.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod harness;
pub mod integrator;
pub mod selftest;
pub mod setup;
pub mod spectral;
pub mod stochastic;
pub mod testing;

pub use error::{Error, Result};
