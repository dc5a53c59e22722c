//! Random test fields shared by the unit tests, the operator identity suite
//! and the CLI `diagnose` command.

use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{leray_project, SpectralVectorField, TorusGrid};

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// Real, mean-zero random field with coefficients of size
/// `(1 + |k|^2)^(-decay)`. Not divergence-free; optionally truncated to the
/// dealiased band.
pub fn random_field(grid: &Arc<TorusGrid>, seed: u64, decay: f64, dealiased: bool) -> SpectralVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.mode_count();
    let raw: [Vec<Complex64>; 2] = std::array::from_fn(|_| {
        (0..m)
            .map(|idx| {
                let w = (1.0 + grid.eigenvalue(idx)).powf(-decay);
                Complex64::new(uniform(&mut rng), uniform(&mut rng)) * w
            })
            .collect()
    });
    let mask = grid.dealias_mask();
    let comps = raw.map(|c| {
        (0..m)
            .map(|idx| {
                if dealiased && !mask[idx] {
                    Complex64::new(0.0, 0.0)
                } else {
                    (c[idx] + c[grid.conjugate_index(idx)].conj()) * 0.5
                }
            })
            .collect()
    });
    SpectralVectorField::from_coefficients(grid, comps).expect("sizes match the grid")
}

/// Random divergence-free field, optionally dealiased.
pub fn random_solenoidal(grid: &Arc<TorusGrid>, seed: u64, decay: f64, dealiased: bool) -> SpectralVectorField {
    leray_project(&random_field(grid, seed, decay, dealiased))
}
