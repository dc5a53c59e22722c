use std::sync::Arc;

use num_complex::Complex64;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Real periodic vector field stored as Fourier coefficients `u_hat[k] in C^2`.
///
/// The mean mode is kept at zero and coefficients satisfy
/// `u_hat[-k] = conj(u_hat[k])`. `divergence_free` is set by the operations
/// that produce solenoidal output (Leray projection and everything built on it).
#[derive(Clone, Debug)]
pub struct SpectralVectorField {
    grid: Arc<TorusGrid>,
    coeffs: [Vec<Complex64>; 2],
    divergence_free: bool,
}

/// Equal grids and bitwise-equal coefficients; the solenoidal flag is ignored.
impl PartialEq for SpectralVectorField {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.coeffs == other.coeffs
    }
}

impl SpectralVectorField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        let m = grid.mode_count();
        Self {
            grid: Arc::clone(grid),
            coeffs: [vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m]],
            divergence_free: true,
        }
    }

    /// Wrap raw coefficient arrays. The mean mode is zeroed; the field is not
    /// flagged divergence-free.
    pub fn from_coefficients(grid: &Arc<TorusGrid>, coeffs: [Vec<Complex64>; 2]) -> Result<Self> {
        let m = grid.mode_count();
        for c in &coeffs {
            if c.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: c.len(),
                });
            }
        }
        let mut field = Self {
            grid: Arc::clone(grid),
            coeffs,
            divergence_free: false,
        };
        field.coeffs[0][0] = Complex64::new(0.0, 0.0);
        field.coeffs[1][0] = Complex64::new(0.0, 0.0);
        Ok(field)
    }

    /// Real field `a exp(i k.x) + conj(a) exp(-i k.x)` for wavenumber indices
    /// `(jx, jy)`. The Nyquist row/column is rejected since its conjugate
    /// partner coincides with itself.
    pub fn single_mode(grid: &Arc<TorusGrid>, j: (i64, i64), amplitude: [Complex64; 2]) -> Result<Self> {
        let half = grid.n() as i64 / 2;
        if j == (0, 0) {
            return Err(Error::InvalidArgument("the mean mode cannot carry amplitude".into()));
        }
        if j.0.abs() >= half || j.1.abs() >= half {
            return Err(Error::InvalidArgument(format!(
                "mode ({}, {}) is not representable on an n = {} grid",
                j.0,
                j.1,
                grid.n()
            )));
        }
        let mut field = Self::zeros(grid);
        let idx = grid.flat_index(j.0, j.1);
        let cidx = grid.conjugate_index(idx);
        for c in 0..2 {
            field.coeffs[c][idx] += amplitude[c];
            field.coeffs[c][cidx] += amplitude[c].conj();
        }
        let (kx, ky) = grid.wavenumber(idx);
        let div = amplitude[0] * kx + amplitude[1] * ky;
        let scale = amplitude[0].norm().max(amplitude[1].norm()) * kx.hypot(ky);
        field.divergence_free = div.norm() <= 1e-14 * scale;
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 2] {
        &self.coeffs
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<Complex64>; 2] {
        &mut self.coeffs
    }

    pub fn into_components(self) -> [Vec<Complex64>; 2] {
        self.coeffs
    }

    /// Coefficient pair at a flat mode index.
    pub fn mode(&self, idx: usize) -> [Complex64; 2] {
        [self.coeffs[0][idx], self.coeffs[1][idx]]
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub(crate) fn set_divergence_free(&mut self, flag: bool) {
        self.divergence_free = flag;
    }

    pub(crate) fn with_flag(mut self, flag: bool) -> Self {
        self.divergence_free = flag;
        self
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `self + other`; the divergence-free flag survives if both carry it.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let mut out = self.clone();
        for c in 0..2 {
            for (o, x) in out.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *o += x * a;
            }
        }
        out.divergence_free = self.divergence_free && other.divergence_free;
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            c.iter_mut().for_each(|z| *z *= a);
        }
        out
    }

    /// Largest coefficient modulus over both components.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Largest violation of `u_hat[-k] = conj(u_hat[k])`.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let g = &self.grid;
        let mut err = 0.0_f64;
        for c in &self.coeffs {
            for idx in 0..g.mode_count() {
                let d = c[idx] - c[g.conjugate_index(idx)].conj();
                err = err.max(d.norm());
            }
        }
        err
    }
}

/// Samples of a real vector field on the `n x n` lattice, row-major in
/// `(ix, iy)`.
#[derive(Clone, Debug)]
pub struct PhysicalVectorField {
    grid: Arc<TorusGrid>,
    samples: [Vec<f64>; 2],
}

impl PhysicalVectorField {
    pub fn new(grid: &Arc<TorusGrid>, samples: [Vec<f64>; 2]) -> Result<Self> {
        let m = grid.mode_count();
        for s in &samples {
            if s.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: s.len(),
                });
            }
        }
        Ok(Self {
            grid: Arc::clone(grid),
            samples,
        })
    }

    /// Sample a closure `f(x, y) -> [u1, u2]` on the lattice.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let n = grid.n();
        let mut samples = [Vec::with_capacity(n * n), Vec::with_capacity(n * n)];
        for ix in 0..n {
            for iy in 0..n {
                let (x, y) = grid.point(ix, iy);
                let v = f(x, y);
                samples[0].push(v[0]);
                samples[1].push(v[1]);
            }
        }
        Self {
            grid: Arc::clone(grid),
            samples,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.samples[c]
    }

    pub fn into_components(self) -> [Vec<f64>; 2] {
        self.samples
    }

    /// Lattice mean of each component.
    pub fn mean(&self) -> [f64; 2] {
        let m = self.grid.mode_count() as f64;
        [
            self.samples[0].iter().sum::<f64>() / m,
            self.samples[1].iter().sum::<f64>() / m,
        ]
    }

    /// Rectangle-rule quadrature of `|u|^2` over the torus.
    pub fn energy_quadrature(&self) -> f64 {
        let s: f64 = self.samples[0]
            .iter()
            .zip(&self.samples[1])
            .map(|(a, b)| a * a + b * b)
            .sum();
        s * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
