//! Brownian increments and additive noise.
//!
//! Every path is drawn from its own ChaCha8 stream, keyed by
//! `(seed, path_index)`, so a path never depends on how many other paths were
//! generated before it or on which worker generated it. Standard normals come
//! from the inverse normal CDF applied to `(floor(x / 2^11) + 1/2) / 2^53` for
//! each 64-bit output `x`.

use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{eval_forcing, Forcing, ForcingSpec, ModeTerm};
use crate::error::{Error, Result};
use crate::spectral::{SpectralVectorField, TorusGrid};

/// Number of steps `T / dt`, provided `dt` divides `T` to within `1e-12`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide T = {horizon}")));
    }
    Ok(n as usize)
}

/// Brownian increments on a uniform grid `t_i = i dt`, `i = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    seed: u64,
    path_index: u64,
    dt: f64,
    steps: usize,
    components: usize,
    // row-major: increments[i * m + c] = W_c(t_{i+1}) - W_c(t_i)
    increments: Vec<f64>,
}

fn standard_normal(rng: &mut ChaCha8Rng, normal: &Normal) -> f64 {
    let x = rng.next_u64() >> 11;
    let u = (x as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    normal.inverse_cdf(u)
}

/// Path 0 of the stream family `seed`.
pub fn sample_wiener(horizon: f64, dt: f64, components: usize, seed: u64) -> Result<WienerPath> {
    sample_wiener_path(horizon, dt, components, seed, 0)
}

/// Path `path_index` of the stream family `seed`.
pub fn sample_wiener_path(
    horizon: f64,
    dt: f64,
    components: usize,
    seed: u64,
    path_index: u64,
) -> Result<WienerPath> {
    let steps = step_count(horizon, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = dt.sqrt();
    let increments = (0..steps * components)
        .map(|_| scale * standard_normal(&mut rng, &normal))
        .collect();
    Ok(WienerPath {
        seed,
        path_index,
        dt,
        steps,
        components,
        increments,
    })
}

impl WienerPath {
    /// A path with all increments zero (deterministic runs).
    pub fn zero(horizon: f64, dt: f64, components: usize) -> Result<Self> {
        let steps = step_count(horizon, dt)?;
        Ok(Self {
            seed: 0,
            path_index: 0,
            dt,
            steps,
            components,
            increments: vec![0.0; steps * components],
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// `Delta W` over `[t_i, t_{i+1}]`.
    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.components..(i + 1) * self.components]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W(t_i)` for every grid point, starting at `W(0) = 0`.
    pub fn values(&self) -> Vec<Vec<f64>> {
        let mut w = vec![0.0; self.components];
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(w.clone());
        for i in 0..self.steps {
            for (a, d) in w.iter_mut().zip(self.increment(i)) {
                *a += d;
            }
            out.push(w.clone());
        }
        out
    }

    /// Same Brownian path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<WienerPath> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps
            )));
        }
        let m = self.components;
        let steps = self.steps / factor;
        let mut increments = vec![0.0; steps * m];
        for i in 0..steps {
            for j in 0..factor {
                for (acc, d) in increments[i * m..(i + 1) * m]
                    .iter_mut()
                    .zip(self.increment(i * factor + j))
                {
                    *acc += d;
                }
            }
        }
        Ok(WienerPath {
            seed: self.seed,
            path_index: self.path_index,
            dt: self.dt * factor as f64,
            steps,
            components: m,
            increments,
        })
    }

    /// Order-sensitive digest of the increment bits, used to assert that
    /// coupled runs consumed the same path.
    pub fn checksum(&self) -> u64 {
        // FNV-1a over the little-endian bytes
        let mut h: u64 = 0xcbf29ce484222325;
        for x in &self.increments {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// CSV rows `step,t,dW_1,...,dW_m` (no header).
    pub fn write_csv_rows<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for i in 0..self.steps {
            write!(w, "{},{}", i, self.time(i))?;
            for d in self.increment(i) {
                write!(w, ",{d}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Noise coefficients `G_1 .. G_m`, each a finite divergence-free Fourier sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseSpec {
    pub components: Vec<Vec<ModeTerm>>,
}

impl NoiseSpec {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .try_for_each(ModeTerm::validate)
    }
}

/// [`NoiseSpec`] resolved on a grid.
#[derive(Clone, Debug)]
pub struct NoiseCoefficients {
    components: Vec<Forcing>,
    grid: Arc<TorusGrid>,
}

impl NoiseCoefficients {
    pub fn new(spec: &NoiseSpec, grid: &Arc<TorusGrid>, horizon: f64) -> Result<Self> {
        let components = spec
            .components
            .iter()
            .map(|terms| Forcing::new(&ForcingSpec { terms: terms.clone() }, grid, horizon))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            components,
            grid: Arc::clone(grid),
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.iter().all(Forcing::is_zero)
    }

    /// `G_k(t)`.
    pub fn component(&self, k: usize, t: f64) -> Result<SpectralVectorField> {
        eval_forcing(&self.components[k], t)
    }
}

/// `sum_k G_k(t) dW_k`.
pub fn noise_increment(noise: &NoiseCoefficients, t: f64, dw: &[f64]) -> Result<SpectralVectorField> {
    if dw.len() != noise.len() {
        return Err(Error::DimensionMismatch {
            expected: noise.len(),
            got: dw.len(),
        });
    }
    let mut out = SpectralVectorField::zeros(&noise.grid);
    for (k, &d) in dw.iter().enumerate() {
        if d != 0.0 {
            out = out.axpy(d, &noise.component(k, t)?)?;
        }
    }
    Ok(out)
}
