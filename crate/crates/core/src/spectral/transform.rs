use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{PhysicalVectorField, SpectralVectorField};
use super::grid::TorusGrid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// 2D FFT pair for one grid.
///
/// Two real fields share one complex transform (`a + i b`), which halves the
/// transform count of every nonlinear evaluation. Plans are immutable and
/// shareable; scratch space is allocated per call.
#[derive(Clone)]
pub struct SpectralTransform {
    grid: Arc<TorusGrid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: &Arc<TorusGrid>) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        Self {
            grid: Arc::clone(grid),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    fn check(&self, grid: &Arc<TorusGrid>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, grid) || *self.grid == **grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let n = self.grid.n();
        for i in 0..n {
            for j in (i + 1)..n {
                buf.swap(i * n + j, j * n + i);
            }
        }
    }

    fn run_2d(&self, plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        self.transpose(buf);
        plan.process_with_scratch(buf, &mut scratch);
        self.transpose(buf);
    }

    /// Unnormalized synthesis `sum_k c_k exp(i k.x)` in place.
    pub(crate) fn synthesize(&self, buf: &mut [Complex64]) {
        self.run_2d(&self.inverse, buf);
    }

    /// Analysis with the `1/n^2` normalization, in place.
    pub(crate) fn analyze(&self, buf: &mut [Complex64]) {
        self.run_2d(&self.forward, buf);
        let norm = 1.0 / (self.grid.mode_count() as f64);
        buf.iter_mut().for_each(|z| *z *= norm);
    }

    /// Physical samples of two real scalar fields given by conjugate-symmetric
    /// coefficient arrays.
    pub(crate) fn pair_to_physical(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x + Complex64::i() * y)
            .collect();
        self.synthesize(&mut buf);
        buf.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// Coefficients of two real scalar fields from their samples.
    pub(crate) fn pair_to_spectral(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.analyze(&mut buf);
        let g = &self.grid;
        let m = g.mode_count();
        let mut ra = Vec::with_capacity(m);
        let mut rb = Vec::with_capacity(m);
        for idx in 0..m {
            let z = buf[idx];
            let w = buf[g.conjugate_index(idx)].conj();
            ra.push((z + w) * 0.5);
            // (z - w) / (2i)
            let d = (z - w) * 0.5;
            rb.push(Complex64::new(d.im, -d.re));
        }
        (ra, rb)
    }

    pub(crate) fn scalar_to_physical(&self, a: &[Complex64]) -> Vec<f64> {
        let mut buf = a.to_vec();
        self.synthesize(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    pub fn to_physical(&self, u: &SpectralVectorField) -> Result<PhysicalVectorField> {
        self.check(u.grid())?;
        let (a, b) = self.pair_to_physical(u.component(0), u.component(1));
        PhysicalVectorField::new(&self.grid, [a, b])
    }

    /// Inverse of [`to_physical`](Self::to_physical). The mean mode is
    /// discarded, so only mean-zero samples round-trip.
    pub fn to_spectral(&self, p: &PhysicalVectorField) -> Result<SpectralVectorField> {
        self.check(p.grid())?;
        let (a, b) = self.pair_to_spectral(p.component(0), p.component(1));
        SpectralVectorField::from_coefficients(&self.grid, [a, b])
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid(n: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::periodic_2pi(n).unwrap())
    }

    #[test]
    fn zero_field_has_zero_samples() {
        let g = grid(16);
        let t = SpectralTransform::new(&g);
        let p = t.to_physical(&SpectralVectorField::zeros(&g)).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn cosine_energy_matches_lattice_quadrature() {
        // u = (cos x, 0) on [0, 2pi]^2: int |u|^2 = 2 pi^2.
        let g = grid(32);
        let t = SpectralTransform::new(&g);
        let p = PhysicalVectorField::from_fn(&g, |x, _| [x.cos(), 0.0]);
        let quad = p.energy_quadrature();
        assert!((quad - 2.0 * PI * PI).abs() < 1e-12 * quad);
        let u = t.to_spectral(&p).unwrap();
        let spectral: f64 = u
            .components()
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * g.length()
            * g.length();
        assert!((spectral - quad).abs() < 1e-12 * quad);
        // a single mode pair at j = (+-1, 0) with amplitude 1/2
        let idx = g.flat_index(1, 0);
        assert!((u.component(0)[idx] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pair_packing_separates_fields() {
        let g = grid(16);
        let t = SpectralTransform::new(&g);
        let p = PhysicalVectorField::from_fn(&g, |x, y| [(2.0 * x).sin() * y.cos(), (x - 3.0 * y).cos()]);
        let u = t.to_spectral(&p).unwrap();
        assert!(u.conjugate_symmetry_error() < 1e-15);
        let q = t.to_physical(&u).unwrap();
        for c in 0..2 {
            for (a, b) in p.component(c).iter().zip(q.component(c)) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let t = SpectralTransform::new(&grid(16));
        let other = grid(32);
        assert!(matches!(
            t.to_physical(&SpectralVectorField::zeros(&other)),
            Err(Error::GridMismatch)
        ));
    }
}
