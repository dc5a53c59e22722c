//! Fourier representation of periodic vector fields on the square torus
//! `[0, L]^2` and the diagonal linear operators acting on them.
//!
//! Coefficients follow `u_hat[k] = (1/n^2) * sum_x u(x) exp(-i k.x)`, so a field
//! is reconstructed as `u(x) = sum_k u_hat[k] exp(i k.x)` and Parseval reads
//! `int |u|^2 dx = L^2 * sum_k |u_hat[k]|^2`.

mod field;
mod grid;
mod ops;
pub mod snapshot;
mod transform;

pub use field::{PhysicalVectorField, SpectralVectorField};
pub use grid::TorusGrid;
pub use ops::{
    curl, dealias, distance_sq, divergence_residual, gradient_inner_product, helmholtz, inner_product_h,
    inner_product_v, inverse_helmholtz, leray_project, sobolev_norm, stokes_apply,
};
pub use transform::SpectralTransform;
