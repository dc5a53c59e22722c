//! Diagonal operators: every one of them acts mode by mode, so they commute
//! with each other and never need a transform.

use num_complex::Complex64;

use super::field::SpectralVectorField;
use crate::error::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        Err(Error::NegativeAlpha(alpha))
    } else {
        Ok(())
    }
}

fn map_modes(u: &SpectralVectorField, mut f: impl FnMut(usize, [Complex64; 2]) -> [Complex64; 2]) -> SpectralVectorField {
    let mut out = u.clone();
    let comps = out.components_mut();
    for idx in 0..comps[0].len() {
        let [a, b] = f(idx, [comps[0][idx], comps[1][idx]]);
        comps[0][idx] = a;
        comps[1][idx] = b;
    }
    out
}

/// Leray projector: removes the gradient part of every mode,
/// `u_hat -> u_hat - k (k . u_hat) / |k|^2`.
///
/// Evaluated with the integer index vector `j` (the projector only depends on
/// the direction of `k`), which keeps axis-aligned modes exact.
pub fn leray_project(u: &SpectralVectorField) -> SpectralVectorField {
    let g = u.grid().clone();
    let (jx, jy) = g.index_components();
    map_modes(u, |idx, [a, b]| {
        if idx == 0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let (x, y) = (jx[idx], jy[idx]);
        let s = (a * x + b * y) / (x * x + y * y);
        [a - s * x, b - s * y]
    })
    .with_flag(true)
}

/// Stokes operator `A = -P Delta`, multiplier `|k|^2`. Only defined on
/// solenoidal fields.
pub fn stokes_apply(u: &SpectralVectorField) -> Result<SpectralVectorField> {
    if !u.is_divergence_free() {
        return Err(Error::NotDivergenceFree);
    }
    let g = u.grid().clone();
    let lam = g.eigenvalues();
    Ok(map_modes(u, |idx, [a, b]| [a * lam[idx], b * lam[idx]]))
}

/// `(I + alpha A)^{-1}`, multiplier `1 / (1 + alpha |k|^2)`.
pub fn inverse_helmholtz(u: &SpectralVectorField, alpha: f64) -> Result<SpectralVectorField> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(u.clone());
    }
    let g = u.grid().clone();
    let lam = g.eigenvalues();
    Ok(map_modes(u, |idx, [a, b]| {
        let h = 1.0 / (1.0 + alpha * lam[idx]);
        [a * h, b * h]
    }))
}

/// `(I + alpha A)`, multiplier `1 + alpha |k|^2`.
pub fn helmholtz(u: &SpectralVectorField, alpha: f64) -> Result<SpectralVectorField> {
    check_alpha(alpha)?;
    let g = u.grid().clone();
    let lam = g.eigenvalues();
    Ok(map_modes(u, |idx, [a, b]| {
        let h = 1.0 + alpha * lam[idx];
        [a * h, b * h]
    }))
}

/// `(L^2 sum_{k != 0} |k|^{2s} |u_hat[k]|^2)^{1/2}`.
///
/// `s = 0` is the L2 norm, `s = 1` the gradient norm and `s = -4` the
/// negative-order norm used for time increments.
pub fn sobolev_norm(u: &SpectralVectorField, s: f64) -> f64 {
    let g = u.grid();
    let lam = g.eigenvalues();
    let [a, b] = u.components();
    let mut sum = 0.0;
    for idx in 1..lam.len() {
        let w = if s == 0.0 { 1.0 } else { lam[idx].powf(s) };
        sum += w * (a[idx].norm_sqr() + b[idx].norm_sqr());
    }
    g.length() * sum.sqrt()
}

fn weighted_inner(u: &SpectralVectorField, w: &SpectralVectorField, weight: impl Fn(f64) -> f64) -> Result<f64> {
    u.same_grid(w)?;
    let g = u.grid();
    let lam = g.eigenvalues();
    let [ua, ub] = u.components();
    let [wa, wb] = w.components();
    let mut sum = 0.0;
    for idx in 1..lam.len() {
        let re = (ua[idx] * wa[idx].conj()).re + (ub[idx] * wb[idx].conj()).re;
        sum += weight(lam[idx]) * re;
    }
    Ok(g.length() * g.length() * sum)
}

/// `|u - w|_s^2` without forming the difference.
pub fn distance_sq(u: &SpectralVectorField, w: &SpectralVectorField, s: f64) -> Result<f64> {
    u.same_grid(w)?;
    let g = u.grid();
    let lam = g.eigenvalues();
    let [ua, ub] = u.components();
    let [wa, wb] = w.components();
    let mut sum = 0.0;
    for idx in 1..lam.len() {
        let weight = if s == 0.0 { 1.0 } else { lam[idx].powf(s) };
        sum += weight * ((ua[idx] - wa[idx]).norm_sqr() + (ub[idx] - wb[idx]).norm_sqr());
    }
    Ok(g.length() * g.length() * sum)
}

/// L2 inner product `(u, w)`.
pub fn inner_product_h(u: &SpectralVectorField, w: &SpectralVectorField) -> Result<f64> {
    weighted_inner(u, w, |_| 1.0)
}

/// Gradient inner product `((u, w)) = (grad u, grad w)`.
pub fn gradient_inner_product(u: &SpectralVectorField, w: &SpectralVectorField) -> Result<f64> {
    weighted_inner(u, w, |l| l)
}

/// `(u, w)_V = (u, w) + alpha ((u, w))`.
pub fn inner_product_v(u: &SpectralVectorField, w: &SpectralVectorField, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    weighted_inner(u, w, |l| 1.0 + alpha * l)
}

/// 2/3-rule truncation.
pub fn dealias(u: &SpectralVectorField) -> SpectralVectorField {
    let g = u.grid().clone();
    let mask = g.dealias_mask();
    let zero = Complex64::new(0.0, 0.0);
    let flag = u.is_divergence_free();
    map_modes(u, |idx, m| if mask[idx] { m } else { [zero, zero] }).with_flag(flag)
}

/// Scalar vorticity coefficients `i (k_x u2_hat - k_y u1_hat)`.
pub fn curl(u: &SpectralVectorField) -> Vec<Complex64> {
    let g = u.grid();
    let (kx, ky) = (g.kx(), g.ky());
    let [a, b] = u.components();
    (0..a.len())
        .map(|idx| Complex64::i() * (b[idx] * kx[idx] - a[idx] * ky[idx]))
        .collect()
}

/// `max_k |k . u_hat[k]| / max |u_hat|`, zero for the zero field.
pub fn divergence_residual(u: &SpectralVectorField) -> f64 {
    let g = u.grid();
    let (kx, ky) = (g.kx(), g.ky());
    let [a, b] = u.components();
    let scale = u.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let kmax = g.eigenvalues().iter().fold(0.0_f64, |m, &l| m.max(l)).sqrt();
    let worst = (0..a.len())
        .map(|idx| (a[idx] * kx[idx] + b[idx] * ky[idx]).norm())
        .fold(0.0_f64, f64::max);
    worst / (scale * kmax)
}
