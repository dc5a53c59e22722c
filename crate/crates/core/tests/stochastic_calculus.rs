use std::f64::consts::PI;
use std::sync::Arc;

use sgfluid::dynamics::{ModeTerm, Modulation};
use sgfluid::spectral::{sobolev_norm, SpectralVectorField, TorusGrid};
use sgfluid::stochastic::{noise_increment, sample_wiener_path, NoiseCoefficients, NoiseSpec};

#[test]
fn ito_isometry_for_a_modulated_noise() {
    let g = Arc::new(TorusGrid::periodic_2pi(16).unwrap());
    let a = 0.35;
    let spec = NoiseSpec {
        components: vec![vec![ModeTerm {
            mode: [2, 1],
            amplitude: [[a, 0.0], [-2.0 * a, 0.0]],
            modulation: Modulation::Cosine { period: 0.8 },
        }]],
    };
    let noise = NoiseCoefficients::new(&spec, &g, 1.0).unwrap();
    let dt = 0.02;
    let steps = 50;
    // |G(t)|^2 = 2 L^2 (a^2 + 4 a^2) cos^2(2 pi t / 0.8)
    let expected: f64 = (0..steps)
        .map(|i| {
            let t = i as f64 * dt;
            dt * 2.0 * (2.0 * PI).powi(2) * 5.0 * a * a * (2.0 * PI * t / 0.8).cos().powi(2)
        })
        .sum();
    let samples: Vec<f64> = (0..1024)
        .map(|p| {
            let w = sample_wiener_path(1.0, dt, 1, 8, p).unwrap();
            let mut x = SpectralVectorField::zeros(&g);
            for i in 0..w.steps() {
                x = x.add(&noise_increment(&noise, w.time(i), w.increment(i)).unwrap()).unwrap();
            }
            sobolev_norm(&x, 0.0).powi(2)
        })
        .collect();
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let se = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn distinct_paths_are_uncorrelated() {
    let dt = 1e-3;
    let a = sample_wiener_path(1.0, dt, 1, 3, 0).unwrap();
    let b = sample_wiener_path(1.0, dt, 1, 3, 1).unwrap();
    let n = a.steps() as f64;
    let corr = a.increments().iter().zip(b.increments()).map(|(x, y)| x * y).sum::<f64>() / (n * dt);
    assert!(corr.abs() <= 4.0 / n.sqrt(), "correlation {corr}");
}
