use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Uniform `n x n` collocation lattice on `[0, L]^2` together with its
/// Fourier mode table.
///
/// Mode storage is row-major: flat index `ix * n + iy`, where `ix` and `iy`
/// are FFT-ordered indices mapping to integer wavenumber indices
/// `j = ix` for `ix < n/2` and `j = ix - n` otherwise, so `j` ranges over
/// `[-n/2, n/2)`. Physical samples use the same layout with
/// `x = ix * L / n`, `y = iy * L / n`.
#[derive(Clone)]
pub struct TorusGrid {
    length: f64,
    n: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    lambda: Vec<f64>,
    jx: Vec<f64>,
    jy: Vec<f64>,
    mask: Vec<bool>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("length", &self.length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

impl TorusGrid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be even and at least 8, got {n}"
            )));
        }
        let base = 2.0 * PI / length;
        let count = n * n;
        let mut kx = Vec::with_capacity(count);
        let mut ky = Vec::with_capacity(count);
        let mut lambda = Vec::with_capacity(count);
        let mut mask = Vec::with_capacity(count);
        let mut jxs = Vec::with_capacity(count);
        let mut jys = Vec::with_capacity(count);
        // |j| < n/3  <=>  3|j| < n
        let keep = |j: i64| 3 * j.unsigned_abs() < n as u64;
        for ix in 0..n {
            let jx = Self::wavenumber_index(n, ix);
            for iy in 0..n {
                let jy = Self::wavenumber_index(n, iy);
                let (a, b) = (base * jx as f64, base * jy as f64);
                kx.push(a);
                ky.push(b);
                lambda.push(a * a + b * b);
                mask.push(keep(jx) && keep(jy));
                jxs.push(jx as f64);
                jys.push(jy as f64);
            }
        }
        Ok(Self {
            length,
            n,
            kx,
            ky,
            lambda,
            jx: jxs,
            jy: jys,
            mask,
        })
    }

    /// `L = 2*pi` grid, the setting of the manufactured solutions.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        Self::new(2.0 * PI, n)
    }

    fn wavenumber_index(n: usize, i: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.n * self.n
    }

    /// Integer wavenumber index `(jx, jy)` of a flat mode index.
    pub fn mode_index(&self, idx: usize) -> (i64, i64) {
        (
            Self::wavenumber_index(self.n, idx / self.n),
            Self::wavenumber_index(self.n, idx % self.n),
        )
    }

    /// Flat index of the mode with wavenumber indices `(jx, jy)`; indices are
    /// taken modulo `n`.
    pub fn flat_index(&self, jx: i64, jy: i64) -> usize {
        let n = self.n as i64;
        (jx.rem_euclid(n) * n + jy.rem_euclid(n)) as usize
    }

    /// Flat index of `-k`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (ix, iy) = (idx / n, idx % n);
        ((n - ix) % n) * n + (n - iy) % n
    }

    pub fn is_mean_mode(&self, idx: usize) -> bool {
        idx == 0
    }

    /// Wavenumber vector `k = (2 pi / L) j`.
    pub fn wavenumber(&self, idx: usize) -> (f64, f64) {
        (self.kx[idx], self.ky[idx])
    }

    /// Stokes eigenvalue `|k|^2` of a mode.
    pub fn eigenvalue(&self, idx: usize) -> f64 {
        self.lambda[idx]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub(crate) fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub(crate) fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// Integer wavenumber indices as floats, per mode.
    pub(crate) fn index_components(&self) -> (&[f64], &[f64]) {
        (&self.jx, &self.jy)
    }

    /// Smallest nonzero Stokes eigenvalue `(2 pi / L)^2`.
    pub fn lambda_min(&self) -> f64 {
        let base = 2.0 * PI / self.length;
        base * base
    }

    /// Poincare constant `(L / 2 pi)^2`.
    pub fn poincare_constant(&self) -> f64 {
        1.0 / self.lambda_min()
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_resolved(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// Coordinates of lattice point `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.length / self.n as f64;
        (ix as f64 * h, iy as f64 * h)
    }

    /// Area element of one lattice cell, `(L/n)^2`.
    pub fn cell_area(&self) -> f64 {
        let h = self.length / self.n as f64;
        h * h
    }
}
