//! Named self-checks: the worked examples of every operation, plus a
//! randomized operator-identity suite.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::config::parse_config;
use crate::diagnostics::{
    energy_residual, helmholtz_image, increment_modulus, l2t_h_distance, record_norms, record_norms_with,
};
use crate::dynamics::{
    advection, advection_unprojected, curl_cross, eval_forcing, remainder, Forcing, ForcingSpec, ModeTerm, Modulation,
};
use crate::exec::Execution;
use crate::harness::{estimate_probability, fit_rate, run_sweep, Provenance, SweepConfig};
use crate::integrator::{simulate, taylor_green, Integrator, ModelParams, StoragePolicy, Trajectory};
use crate::setup::{InitialSpec, PhysicsSpec};
use crate::spectral::{
    dealias, divergence_residual, helmholtz, inner_product_h, inner_product_v, inverse_helmholtz, leray_project,
    sobolev_norm, stokes_apply, PhysicalVectorField, SpectralTransform, SpectralVectorField, TorusGrid,
};
use crate::stochastic::{noise_increment, sample_wiener, sample_wiener_path, NoiseCoefficients, NoiseSpec, WienerPath};
use crate::testing::{random_field, random_solenoidal};

type Outcome = std::result::Result<(), Box<dyn std::error::Error>>;

/// Result of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg().into())
    }
}

fn close(got: f64, want: f64, rel: f64, what: &str) -> Outcome {
    ensure((got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE), || {
        format!("{what}: got {got}, expected {want} (relative tolerance {rel})")
    })
}

fn grid(n: usize) -> Arc<TorusGrid> {
    Arc::new(TorusGrid::periodic_2pi(n).expect("valid grid"))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn diff(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
    a.sub(b).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
}

fn run_all(checks: &[(&'static str, fn() -> Outcome)]) -> Vec<CheckResult> {
    checks
        .iter()
        .map(|(name, f)| match f() {
            Ok(()) => CheckResult {
                name,
                passed: true,
                detail: String::new(),
            },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}

/// Every worked example as a named check.
pub fn selftest() -> Vec<CheckResult> {
    run_all(&[
        ("transform/zero-coefficients", transform_zero),
        ("transform/cos-x-energy", transform_cos_energy),
        ("transform/round-trip", transform_round_trip),
        ("leray/annihilates-gradients", leray_gradients),
        ("leray/fixes-solenoidal", leray_solenoidal),
        ("leray/axis-mode-vs-dense-projector", leray_axis_mode),
        ("stokes/eigenmode", stokes_eigenmode),
        ("stokes/zero", stokes_zero),
        ("stokes/taylor-green", stokes_taylor_green),
        ("helmholtz/alpha-zero-identity", helmholtz_identity),
        ("helmholtz/unit-mode-halved", helmholtz_halved),
        ("helmholtz/monotone-shrink", helmholtz_monotone),
        ("sobolev/zero", sobolev_zero),
        ("sobolev/single-mode", sobolev_single_mode),
        ("sobolev/negative-norm-bound", sobolev_negative_bound),
        ("inner-v/alpha-zero", inner_v_alpha_zero),
        ("inner-v/single-mode", inner_v_single_mode),
        ("inner-v/equivalence", inner_v_equivalence),
        ("dealias/low-modes-kept", dealias_low),
        ("dealias/high-modes-removed", dealias_high),
        ("dealias/idempotent", dealias_idempotent),
        ("curl-cross/taylor-green-gradient", curl_cross_tg),
        ("curl-cross/orthogonal", curl_cross_orthogonal),
        ("curl-cross/zero", curl_cross_zero),
        ("advection/taylor-green-gradient", advection_tg),
        ("advection/zero", advection_zero),
        ("advection/skew-quadrature", advection_skew),
        ("remainder/alpha-zero", remainder_alpha_zero),
        ("remainder/zero-field", remainder_zero_field),
        ("remainder/linear-in-alpha", remainder_linear),
        ("forcing/empty", forcing_empty),
        ("forcing/constant", forcing_constant),
        ("forcing/cosine-quarter-period", forcing_cosine),
        ("wiener/deterministic", wiener_deterministic),
        ("wiener/mean", wiener_mean),
        ("wiener/variance", wiener_variance),
        ("wiener/coarsen-identity", wiener_coarsen_identity),
        ("wiener/coarsen-total", wiener_coarsen_total),
        ("wiener/coarsen-variance", wiener_coarsen_variance),
        ("noise/zero-increment", noise_zero),
        ("noise/unit-increment", noise_unit),
        ("noise/cancellation", noise_cancel),
        ("step/linear-closed-form", step_linear),
        ("step/rest-state", step_rest),
        ("step/taylor-green-one-step", step_tg_one),
        ("simulate/zero-horizon", simulate_zero_horizon),
        ("simulate/deterministic", simulate_deterministic),
        ("simulate/taylor-green-decay", simulate_tg_decay),
        ("taylor-green/divergence-free", tg_divergence),
        ("taylor-green/stokes-eigenvalue", tg_stokes),
        ("taylor-green/zero-amplitude", tg_zero),
        ("norms/zero", norms_zero),
        ("norms/w-single-mode", norms_w_single),
        ("norms/alpha-zero-collapse", norms_collapse),
        ("distance/identical", distance_identical),
        ("distance/constant", distance_constant),
        ("distance/homogeneous", distance_homogeneous),
        ("modulus/constant", modulus_constant),
        ("modulus/two-snapshots", modulus_two),
        ("modulus/linear-ramp", modulus_ramp),
        ("energy/linear-first-order", energy_linear),
        ("energy/zero-trajectory", energy_zero),
        ("energy/stochastic-mean", energy_stochastic_mean),
        ("sweep/reference-only", sweep_reference_only),
        ("sweep/taylor-green-closed-form", sweep_tg_closed_form),
        ("sweep/prefix-invariance", sweep_prefix),
        ("sweep/byte-identical", sweep_bytes),
        ("fit/identity", fit_identity),
        ("fit/quadratic", fit_quadratic),
        ("fit/noisy-power-law", fit_noisy),
        ("probability/all-zero", prob_zero),
        ("probability/all-above", prob_one),
        ("probability/half", prob_half),
        ("config/defaults", config_defaults),
        ("config/zero-viscosity", config_zero_nu),
        ("config/round-trip", config_round_trip),
    ])
}

// transforms

fn transform_zero() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    let p = tr.to_physical(&SpectralVectorField::zeros(&g))?;
    ensure(p.max_abs() == 0.0, || "nonzero samples".into())
}

fn transform_cos_energy() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let p = PhysicalVectorField::from_fn(&g, |x, _| [x.cos(), 0.0]);
    close(p.energy_quadrature(), 2.0 * PI * PI, 1e-13, "quadrature")?;
    close(sobolev_norm(&tr.to_spectral(&p)?, 0.0).powi(2), 2.0 * PI * PI, 1e-13, "Parseval")
}

fn transform_round_trip() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let u = random_field(&g, 7, 1.0, false);
    let back = tr.to_spectral(&tr.to_physical(&u)?)?;
    ensure(diff(&u, &back) <= 1e-13 * u.max_abs(), || "round trip drift".into())
}

// Leray projection

fn gradient_of_random_scalar(g: &Arc<TorusGrid>) -> Result<SpectralVectorField, crate::Error> {
    let phi = random_field(g, 3, 1.0, false);
    let phi = phi.component(0);
    let mut a = vec![c(0.0, 0.0); g.mode_count()];
    let mut b = a.clone();
    for idx in 0..g.mode_count() {
        let (kx, ky) = g.wavenumber(idx);
        a[idx] = c(0.0, kx) * phi[idx];
        b[idx] = c(0.0, ky) * phi[idx];
    }
    SpectralVectorField::from_coefficients(g, [a, b])
}

fn leray_gradients() -> Outcome {
    let g = grid(32);
    let grad = gradient_of_random_scalar(&g)?;
    let p = leray_project(&grad);
    ensure(p.max_abs() <= 1e-15 * grad.max_abs(), || format!("residual {}", p.max_abs()))
}

fn leray_solenoidal() -> Outcome {
    let g = grid(32);
    let u = random_solenoidal(&g, 4, 1.0, false);
    ensure(diff(&leray_project(&u), &u) <= 1e-15 * u.max_abs(), || "projection moved a solenoidal field".into())
}

fn leray_axis_mode() -> Outcome {
    let g = grid(16);
    let (a, b) = (c(0.7, -0.2), c(-0.3, 0.5));
    let u = SpectralVectorField::single_mode(&g, (1, 0), [a, b])?;
    let p = leray_project(&u);
    let idx = g.flat_index(1, 0);
    let (kx, ky) = g.wavenumber(idx);
    let k2 = kx * kx + ky * ky;
    let dense = [[1.0 - kx * kx / k2, -kx * ky / k2], [-ky * kx / k2, 1.0 - ky * ky / k2]];
    let want = [dense[0][0] * a + dense[0][1] * b, dense[1][0] * a + dense[1][1] * b];
    let got = p.mode(idx);
    ensure(got == [c(0.0, 0.0), b], || format!("by hand: {got:?}"))?;
    ensure(got == want, || format!("dense projector: {want:?} vs {got:?}"))
}

// Stokes operator

fn stokes_eigenmode() -> Outcome {
    let g = grid(16);
    let a = [c(2.0, 0.3), c(-1.0, -0.15)];
    let u = SpectralVectorField::single_mode(&g, (1, 2), a)?;
    let au = stokes_apply(&u)?;
    ensure(diff(&au, &u.scaled(5.0)) <= 1e-14, || "A u != 5 u".into())
}

fn stokes_zero() -> Outcome {
    let g = grid(16);
    ensure(stokes_apply(&SpectralVectorField::zeros(&g))?.is_zero(), || "nonzero".into())
}

fn stokes_taylor_green() -> Outcome {
    let g = grid(16);
    let u = taylor_green(&g, 1.0)?;
    ensure(diff(&stokes_apply(&u)?, &u.scaled(2.0)) <= 1e-15, || "A u != 2 u".into())
}

// (I + alpha A)^{-1}

fn helmholtz_identity() -> Outcome {
    let g = grid(16);
    let u = random_solenoidal(&g, 1, 1.0, false);
    ensure(inverse_helmholtz(&u, 0.0)? == u, || "alpha = 0 changed the field".into())
}

fn helmholtz_halved() -> Outcome {
    let g = grid(16);
    let u = SpectralVectorField::single_mode(&g, (0, 1), [c(1.0, 0.5), c(0.0, 0.0)])?;
    let h = inverse_helmholtz(&u, 1.0)?;
    ensure(diff(&h, &u.scaled(0.5)) <= 1e-16, || "amplitude not halved".into())?;
    ensure(diff(&helmholtz(&h, 1.0)?, &u) <= 1e-16, || "forward map does not undo".into())
}

fn helmholtz_monotone() -> Outcome {
    let g = grid(16);
    let u = random_solenoidal(&g, 2, 0.0, false);
    let h = inverse_helmholtz(&u, 0.3)?;
    let mut ratios: Vec<(f64, f64)> = (1..g.mode_count())
        .filter(|&i| u.mode(i)[0].norm() + u.mode(i)[1].norm() > 0.0)
        .map(|i| {
            let num = h.mode(i)[0].norm() + h.mode(i)[1].norm();
            let den = u.mode(i)[0].norm() + u.mode(i)[1].norm();
            (g.eigenvalue(i), num / den)
        })
        .collect();
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in ratios.windows(2) {
        ensure(w[0].1 < 1.0 && (w[1].0 == w[0].0 || w[1].1 < w[0].1), || format!("{w:?}"))?;
    }
    Ok(())
}

// Sobolev norms

fn sobolev_zero() -> Outcome {
    let g = grid(16);
    let z = SpectralVectorField::zeros(&g);
    for s in [-4.0, 0.0, 1.0, 2.5] {
        ensure(sobolev_norm(&z, s) == 0.0, || format!("s = {s}"))?;
    }
    Ok(())
}

fn sobolev_single_mode() -> Outcome {
    let g = grid(16);
    let a = c(0.3, 0.4);
    let u = SpectralVectorField::single_mode(&g, (2, 0), [c(0.0, 0.0), a])?;
    // the conjugate mode contributes equally
    let want = 2.0 * g.length() * a.norm() * 2f64.sqrt();
    close(sobolev_norm(&u, 1.0), want, 1e-14, "||u||")
}

fn sobolev_negative_bound() -> Outcome {
    let g = grid(32);
    let lmin = g.lambda_min();
    for seed in 0..5 {
        let u = random_solenoidal(&g, seed, 0.5, false);
        let lhs = sobolev_norm(&u, -4.0);
        ensure(lhs <= sobolev_norm(&u, 0.0) * lmin.powi(-4), || format!("seed {seed}"))?;
    }
    Ok(())
}

// V inner product

fn inner_v_alpha_zero() -> Outcome {
    let g = grid(16);
    let u = random_solenoidal(&g, 1, 1.0, false);
    let w = random_solenoidal(&g, 2, 1.0, false);
    close(inner_product_v(&u, &w, 0.0)?, inner_product_h(&u, &w)?, 1e-15, "(u,w)_V")
}

fn inner_v_single_mode() -> Outcome {
    let g = grid(16);
    let a = c(0.2, -0.7);
    let u = SpectralVectorField::single_mode(&g, (1, -1), [a, a])?;
    let alpha = 0.3;
    let support = 2.0 * 2.0 * a.norm_sqr();
    let want = support * g.length().powi(2) * (1.0 + alpha * 2.0);
    close(inner_product_v(&u, &u, alpha)?, want, 1e-14, "|u|_V^2")
}

fn inner_v_equivalence() -> Outcome {
    let g = grid(32);
    let alpha = 0.5;
    let p = g.poincare_constant();
    for seed in 0..5 {
        let v = random_solenoidal(&g, seed, 1.0, false);
        let v2 = inner_product_v(&v, &v, alpha)?;
        let grad2 = sobolev_norm(&v, 1.0).powi(2);
        ensure(v2 / (p + alpha) <= grad2 && grad2 <= v2 / alpha, || format!("seed {seed}"))?;
    }
    Ok(())
}

// dealiasing

fn dealias_low() -> Outcome {
    let g = grid(32);
    let u = random_solenoidal(&g, 1, 1.0, true);
    ensure(dealias(&u) == u, || "resolved field changed".into())
}

fn dealias_high() -> Outcome {
    let g = grid(32);
    let u = random_solenoidal(&g, 1, 1.0, false);
    let high = u.sub(&dealias(&u))?;
    ensure(!high.is_zero() && dealias(&high).is_zero(), || "masked modes survived".into())
}

fn dealias_idempotent() -> Outcome {
    let g = grid(32);
    let u = random_field(&g, 5, 0.5, false);
    let d = dealias(&u);
    ensure(dealias(&d) == d, || "not idempotent".into())
}

// nonlinear terms

fn curl_cross_tg() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let u = taylor_green(&g, 1.3)?;
    let b = curl_cross(&tr, &u, 0.0)?;
    ensure(!b.is_zero(), || "expected a nonzero gradient".into())?;
    ensure(leray_project(&b).max_abs() <= 1e-14 * b.max_abs(), || "projection not zero".into())
}

fn curl_cross_orthogonal() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    for alpha in [0.0, 0.1, 1.0] {
        for seed in 0..3 {
            let u = random_solenoidal(&g, seed, 1.5, true);
            let b = curl_cross(&tr, &u, alpha)?;
            let scale = sobolev_norm(&b, 0.0) * sobolev_norm(&u, 0.0);
            let ip = inner_product_h(&b, &u)?;
            ensure(ip.abs() <= 1e-10 * scale, || format!("alpha {alpha}: {ip}"))?;
        }
    }
    Ok(())
}

fn curl_cross_zero() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    ensure(curl_cross(&tr, &SpectralVectorField::zeros(&g), 0.5)?.is_zero(), || "nonzero".into())
}

fn advection_tg() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let u = taylor_green(&g, 0.9)?;
    ensure(advection(&tr, &u)?.max_abs() <= 1e-15, || "not a gradient".into())
}

fn advection_zero() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    ensure(advection(&tr, &SpectralVectorField::zeros(&g))?.is_zero(), || "nonzero".into())
}

fn advection_skew() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let v = random_solenoidal(&g, 9, 1.5, true);
    let b = tr.to_physical(&advection_unprojected(&tr, &v)?)?;
    let vp = tr.to_physical(&v)?;
    let integral: f64 = (0..2)
        .map(|k| b.component(k).iter().zip(vp.component(k)).map(|(x, y)| x * y).sum::<f64>())
        .sum::<f64>()
        * g.cell_area();
    let scale = b.energy_quadrature().sqrt() * vp.energy_quadrature().sqrt();
    ensure(integral.abs() <= 1e-10 * scale, || format!("integral {integral}"))
}

fn remainder_alpha_zero() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    let u = random_solenoidal(&g, 1, 1.0, true);
    ensure(remainder(&tr, &u, 0.0)?.is_zero(), || "nonzero".into())
}

fn remainder_zero_field() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    ensure(remainder(&tr, &SpectralVectorField::zeros(&g), 0.5)?.is_zero(), || "nonzero".into())
}

fn remainder_linear() -> Outcome {
    let g = grid(32);
    let tr = SpectralTransform::new(&g);
    let u = random_solenoidal(&g, 2, 2.0, true);
    let full = sobolev_norm(&remainder(&tr, &u, 0.4)?, -4.0);
    let half = sobolev_norm(&remainder(&tr, &u, 0.2)?, -4.0);
    close(half, 0.5 * full, 0.1, "halved alpha")
}

// forcing

fn forcing_empty() -> Outcome {
    let g = grid(16);
    let f = Forcing::new(&ForcingSpec::default(), &g, 1.0)?;
    ensure(eval_forcing(&f, 0.3)?.is_zero(), || "nonzero".into())
}

fn forcing_constant() -> Outcome {
    let g = grid(16);
    let amp = [[0.0, 0.0], [0.5, -0.25]];
    let f = Forcing::new(&ForcingSpec { terms: vec![ModeTerm::constant([1, 0], amp)] }, &g, 1.0)?;
    let want = SpectralVectorField::single_mode(&g, (1, 0), [c(0.0, 0.0), c(0.5, -0.25)])?;
    ensure(eval_forcing(&f, 0.0)? == want && eval_forcing(&f, 0.8)? == want, || "not constant".into())
}

fn forcing_cosine() -> Outcome {
    let g = grid(16);
    let term = ModeTerm {
        mode: [0, 1],
        amplitude: [[1.0, 0.0], [0.0, 0.0]],
        modulation: Modulation::Cosine { period: 0.4 },
    };
    let f = Forcing::new(&ForcingSpec { terms: vec![term] }, &g, 1.0)?;
    ensure(eval_forcing(&f, 0.1)?.max_abs() <= 1e-16, || "nonzero at quarter period".into())
}

// Wiener paths and noise

fn wiener_deterministic() -> Outcome {
    let a = sample_wiener(1.0, 1e-2, 3, 42)?;
    let b = sample_wiener(1.0, 1e-2, 3, 42)?;
    ensure(a.increments() == b.increments(), || "different increments".into())
}

fn wiener_mean() -> Outcome {
    let dt = 1e-4;
    let w = sample_wiener(1.0, dt, 1, 5)?;
    let n = w.steps() as f64;
    let mean = w.increments().iter().sum::<f64>() / n;
    ensure(mean.abs() <= 4.0 * (dt / n).sqrt(), || format!("mean {mean}"))
}

fn wiener_variance() -> Outcome {
    let dt = 1e-4;
    let w = sample_wiener(1.0, dt, 1, 6)?;
    let n = w.steps() as f64;
    let var = w.increments().iter().map(|x| x * x).sum::<f64>() / n;
    ensure((var - dt).abs() <= 4.0 * (2.0 / n).sqrt() * dt, || format!("variance {var}"))
}

fn wiener_coarsen_identity() -> Outcome {
    let w = sample_wiener(1.0, 0.01, 2, 1)?;
    ensure(w.coarsen(1)?.increments() == w.increments(), || "changed".into())
}

fn wiener_coarsen_total() -> Outcome {
    let w = sample_wiener(1.0, 0.01, 2, 1)?;
    let one = w.coarsen(w.steps())?;
    let total = w.values().last().cloned().unwrap_or_default();
    for k in 0..2 {
        ensure((one.increments()[k] - total[k]).abs() <= 1e-13, || format!("component {k}"))?;
    }
    Ok(())
}

fn wiener_coarsen_variance() -> Outcome {
    let dt = 1e-3;
    let factor = 8;
    let mut sum = 0.0;
    let mut count = 0.0;
    for p in 0..64 {
        let w = sample_wiener_path(1.0, dt, 1, 11, p)?.coarsen(factor)?;
        sum += w.increments().iter().map(|x| x * x).sum::<f64>();
        count += w.steps() as f64;
    }
    let var = sum / count;
    let want = factor as f64 * dt;
    ensure((var - want).abs() <= 4.0 * (2.0 / count).sqrt() * want, || format!("variance {var}"))
}

fn two_noise(g: &Arc<TorusGrid>, opposite: bool) -> Result<NoiseCoefficients, crate::Error> {
    let t1 = ModeTerm::constant([1, 1], [[0.3, 0.0], [-0.3, 0.0]]);
    let t2 = if opposite {
        ModeTerm::constant([1, 1], [[-0.3, 0.0], [0.3, 0.0]])
    } else {
        ModeTerm::constant([0, 2], [[0.1, 0.1], [0.0, 0.0]])
    };
    NoiseCoefficients::new(&NoiseSpec { components: vec![vec![t1], vec![t2]] }, g, 1.0)
}

fn noise_zero() -> Outcome {
    let g = grid(16);
    ensure(noise_increment(&two_noise(&g, false)?, 0.0, &[0.0, 0.0])?.is_zero(), || "nonzero".into())
}

fn noise_unit() -> Outcome {
    let g = grid(16);
    let spec = NoiseSpec {
        components: vec![vec![ModeTerm::constant([1, 1], [[0.3, 0.0], [-0.3, 0.0]])]],
    };
    let noise = NoiseCoefficients::new(&spec, &g, 1.0)?;
    ensure(noise_increment(&noise, 0.2, &[1.0])? == noise.component(0, 0.2)?, || "not G_1".into())
}

fn noise_cancel() -> Outcome {
    let g = grid(16);
    ensure(noise_increment(&two_noise(&g, true)?, 0.0, &[0.7, 0.7])?.is_zero(), || "nonzero".into())
}

// integrator

fn plain_params(g: &Arc<TorusGrid>, alpha: f64, dt: f64, horizon: f64, u0: SpectralVectorField) -> ModelParams {
    ModelParams {
        alpha,
        nu: 0.1,
        forcing: Forcing::new(&ForcingSpec::default(), g, horizon).expect("empty forcing"),
        noise: NoiseCoefficients::new(&NoiseSpec::default(), g, horizon).expect("empty noise"),
        horizon,
        dt,
        grid: Arc::clone(g),
        initial: u0,
        nonlinear: true,
    }
}

fn step_linear() -> Outcome {
    let g = grid(16);
    let u = SpectralVectorField::single_mode(&g, (2, 1), [c(0.1, 0.2), c(-0.2, -0.4)])?;
    let mut p = plain_params(&g, 0.25, 0.01, 1.0, u.clone());
    p.nonlinear = false;
    let next = Integrator::new(p.clone())?.step(&u, 0.0, &[], 0)?;
    let lam = 5.0;
    let factor = 1.0 / (1.0 + p.dt * p.nu * lam / (1.0 + p.alpha * lam));
    ensure(diff(&next, &u.scaled(factor)) <= 1e-16, || "closed form mismatch".into())
}

fn step_rest() -> Outcome {
    let g = grid(16);
    let z = SpectralVectorField::zeros(&g);
    let p = plain_params(&g, 0.5, 0.01, 1.0, z.clone());
    ensure(Integrator::new(p)?.step(&z, 0.0, &[], 0)?.is_zero(), || "left rest".into())
}

fn step_tg_one() -> Outcome {
    let g = grid(32);
    let u = taylor_green(&g, 1.0)?;
    let p = plain_params(&g, 0.0, 1e-3, 1.0, u.clone());
    let next = Integrator::new(p)?.step(&u, 0.0, &[], 0)?;
    let factor = 1.0 / (1.0 + 2.0 * 0.1 * 1e-3);
    ensure(diff(&next, &u.scaled(factor)) <= 1e-15, || "decay factor".into())
}

fn simulate_zero_horizon() -> Outcome {
    let g = grid(16);
    let u = taylor_green(&g, 1.0)?;
    let p = plain_params(&g, 0.1, 1e-3, 0.0, u.clone());
    let traj = simulate(&p, &WienerPath::zero(0.0, 1e-3, 0)?, StoragePolicy::fields(1), &mut [])?;
    ensure(traj.times == [0.0] && traj.fields.len() == 1 && traj.final_state == u, || "not only u0".into())
}

fn simulate_deterministic() -> Outcome {
    let g = grid(16);
    let spec = NoiseSpec {
        components: vec![vec![ModeTerm::constant([1, 0], [[0.0, 0.0], [0.5, 0.0]])]],
    };
    let mut p = plain_params(&g, 0.2, 1e-2, 0.5, random_solenoidal(&g, 3, 2.0, true));
    p.noise = NoiseCoefficients::new(&spec, &g, 0.5)?;
    let path = sample_wiener_path(0.5, 1e-2, 1, 8, 2)?;
    let a = simulate(&p, &path, StoragePolicy::fields(1), &mut [])?;
    let b = simulate(&p, &path, StoragePolicy::fields(1), &mut [])?;
    ensure(a.fields == b.fields && a.norms == b.norms, || "runs differ".into())
}

fn decay_rate(alpha: f64) -> Result<f64, Box<dyn std::error::Error>> {
    let g = grid(64);
    let tr = SpectralTransform::new(&g);
    let u = taylor_green(&g, 1.0)?;
    let p = plain_params(&g, alpha, 1e-3, 1.0, u.clone());
    let traj = simulate(&p, &WienerPath::zero(1.0, 1e-3, 0)?, StoragePolicy::nothing(), &mut [])?;
    let start = tr.to_physical(&u)?.max_abs();
    let end = tr.to_physical(&traj.final_state)?.max_abs();
    Ok(-(end / start).ln())
}

fn simulate_tg_decay() -> Outcome {
    let alpha = 0.5;
    close(decay_rate(alpha)?, 2.0 * 0.1 / (1.0 + 2.0 * alpha), 0.01, "decay rate")
}

fn tg_divergence() -> Outcome {
    let g = grid(16);
    let u = taylor_green(&g, 1.7)?;
    ensure(divergence_residual(&u) == 0.0, || "divergent".into())
}

fn tg_stokes() -> Outcome {
    stokes_taylor_green()
}

fn tg_zero() -> Outcome {
    ensure(taylor_green(&grid(16), 0.0)?.is_zero(), || "nonzero".into())
}

// diagnostics

fn trajectory(fields: Vec<SpectralVectorField>, dt: f64) -> Trajectory {
    Trajectory {
        alpha: 0.0,
        dt,
        times: (0..fields.len()).map(|i| i as f64 * dt).collect(),
        norms: Vec::new(),
        field_stride: Some(1),
        final_state: fields.last().expect("non-empty").clone(),
        fields,
        warnings: Vec::new(),
    }
}

fn norms_zero() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    let r = record_norms(&tr, &SpectralVectorField::zeros(&g), 0.3)?;
    ensure(r.h == 0.0 && r.grad == 0.0 && r.v == 0.0 && r.w == 0.0 && r.remainder == Some(0.0), || {
        format!("{r:?}")
    })
}

fn norms_w_single() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    let u = SpectralVectorField::single_mode(&g, (0, 1), [c(0.3, -0.4), c(0.0, 0.0)])?;
    let r = record_norms_with(&tr, 0.0, &u, 1.0, false)?;
    // (1 + alpha lambda) = 2 times |curl u|, and |curl u| = sqrt(lambda) |u| = |u|
    close(r.w, 2.0 * r.h, 1e-14, "|u|_W")
}

fn norms_collapse() -> Outcome {
    let g = grid(16);
    let tr = SpectralTransform::new(&g);
    let u = random_solenoidal(&g, 4, 1.0, true);
    let r = record_norms_with(&tr, 0.0, &u, 0.0, false)?;
    ensure(r.v == r.h, || "|u|_V != |u|".into())?;
    close(r.w, r.grad, 1e-12, "|u|_W vs |curl u|")?;
    let phi = helmholtz_image(&u, 0.0)?;
    ensure(diff(&phi, &u) <= 1e-15, || "Phi != u".into())
}

fn distance_identical() -> Outcome {
    let g = grid(8);
    let a = trajectory(vec![random_solenoidal(&g, 1, 1.0, false); 5], 0.1);
    ensure(l2t_h_distance(&a, &a)? == 0.0, || "nonzero".into())
}

fn distance_constant() -> Outcome {
    let g = grid(8);
    let cst = random_solenoidal(&g, 1, 1.0, false);
    let a = trajectory(vec![cst.clone(); 11], 0.1);
    let b = trajectory(vec![SpectralVectorField::zeros(&g); 11], 0.1);
    close(l2t_h_distance(&a, &b)?, sobolev_norm(&cst, 0.0), 1e-12, "|c| sqrt(T)")
}

fn distance_homogeneous() -> Outcome {
    let g = grid(8);
    let cst = random_solenoidal(&g, 2, 1.0, false);
    let a = trajectory((0..6).map(|i| cst.scaled(i as f64)).collect(), 0.1);
    let a2 = trajectory((0..6).map(|i| cst.scaled(2.0 * i as f64)).collect(), 0.1);
    let b = trajectory(vec![SpectralVectorField::zeros(&g); 6], 0.1);
    close(l2t_h_distance(&a2, &b)?, 2.0 * l2t_h_distance(&a, &b)?, 1e-14, "doubling")
}

fn modulus_constant() -> Outcome {
    let g = grid(8);
    let a = trajectory(vec![random_solenoidal(&g, 1, 1.0, false); 21], 0.01);
    ensure(increment_modulus(&a, 0.05)? == 0.0, || "nonzero".into())
}

fn modulus_two() -> Outcome {
    let g = grid(8);
    let u0 = random_solenoidal(&g, 1, 1.0, false);
    let e = random_solenoidal(&g, 2, 1.0, false);
    let dt = 0.01;
    let a = trajectory(vec![u0.clone(), u0.add(&e)?], dt);
    close(increment_modulus(&a, dt)?, dt * sobolev_norm(&e, -4.0).powi(2), 1e-14, "single term")
}

fn modulus_ramp() -> Outcome {
    let g = grid(8);
    let e = random_solenoidal(&g, 2, 1.0, false);
    let dt = 0.01;
    let n = 40;
    let a = trajectory((0..=n).map(|i| e.scaled(i as f64 * dt)).collect(), dt);
    let e2 = sobolev_norm(&e, -4.0).powi(2);
    for d in [1usize, 2, 4, 8] {
        let want = dt * (n - d + 1) as f64 * (d as f64 * dt).powi(2) * e2;
        close(increment_modulus(&a, d as f64 * dt)?, want, 1e-12, &format!("shift {d}"))?;
    }
    Ok(())
}

fn linear_residual_max(dt: f64) -> Result<f64, Box<dyn std::error::Error>> {
    let g = grid(16);
    let mut p = plain_params(&g, 0.25, dt, 0.1, random_solenoidal(&g, 5, 2.0, true));
    p.nonlinear = false;
    let path = WienerPath::zero(0.1, dt, 0)?;
    let traj = simulate(&p, &path, StoragePolicy::fields(1), &mut [])?;
    Ok(energy_residual(&traj, &path, &p)?.iter().fold(0.0, |m, r| m.max(r.abs())))
}

fn energy_linear() -> Outcome {
    let ratio = linear_residual_max(0.01)? / linear_residual_max(0.005)?;
    // per-step residual is second order, so the accumulated one is first order
    ensure((3.5..4.5).contains(&ratio), || format!("per-step ratio {ratio}"))
}

fn energy_zero() -> Outcome {
    let g = grid(8);
    let z = SpectralVectorField::zeros(&g);
    let p = plain_params(&g, 0.2, 0.1, 0.5, z.clone());
    let path = WienerPath::zero(0.5, 0.1, 0)?;
    let traj = simulate(&p, &path, StoragePolicy::fields(1), &mut [])?;
    ensure(energy_residual(&traj, &path, &p)?.iter().all(|&r| r == 0.0), || "nonzero".into())
}

fn energy_stochastic_mean() -> Outcome {
    let g = grid(8);
    let horizon = 0.05;
    let dt = 0.01;
    let spec = NoiseSpec {
        components: vec![
            vec![ModeTerm::constant([1, 0], [[0.0, 0.0], [0.4, 0.0]])],
            vec![ModeTerm::constant([1, 1], [[0.0, 0.2], [0.0, -0.2]])],
        ],
    };
    let mut p = plain_params(&g, 0.25, dt, horizon, random_solenoidal(&g, 5, 2.0, true));
    p.noise = NoiseCoefficients::new(&spec, &g, horizon)?;
    let mut totals = Vec::new();
    for k in 0..512 {
        let path = sample_wiener_path(horizon, dt, 2, 77, k)?;
        let traj = simulate(&p, &path, StoragePolicy::fields(1), &mut [])?;
        totals.push(energy_residual(&traj, &path, &p)?.iter().sum::<f64>());
    }
    let m = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / m;
    let sd = (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    ensure(mean.abs() <= 4.0 * sd / m.sqrt(), || format!("mean {mean} vs standard error {}", sd / m.sqrt()))
}

// harness

fn small_physics(horizon: f64, dt: f64) -> PhysicsSpec {
    PhysicsSpec {
        n: 16,
        horizon,
        dt,
        noise: NoiseSpec {
            components: vec![vec![ModeTerm::constant([1, 0], [[0.0, 0.0], [0.3, 0.0]])]],
        },
        ..PhysicsSpec::default()
    }
}

fn small_sweep(alphas: Vec<f64>, paths: usize) -> SweepConfig {
    SweepConfig {
        alphas,
        paths,
        deltas: vec![1, 2, 4],
        modulus_n: 16,
        modulus_paths: 2,
        ..SweepConfig::with_defaults(small_physics(0.05, 0.005))
    }
}

fn sweep_reference_only() -> Outcome {
    let r = run_sweep(&small_sweep(vec![0.0], 3), Execution::Sequential)?;
    ensure(r.paths.iter().all(|p| p.runs[0].distance == Some(0.0)), || "nonzero self-distance".into())
}

fn sweep_tg_closed_form() -> Outcome {
    let nu: f64 = 0.1;
    let horizon = 1.0;
    let physics = PhysicsSpec {
        n: 16,
        nu,
        horizon,
        dt: 1e-3,
        initial: InitialSpec::TaylorGreen { amplitude: 1.0 },
        ..PhysicsSpec::default()
    };
    let cfg = SweepConfig {
        alphas: vec![0.5, 0.0],
        paths: 1,
        deltas: Vec::new(),
        ..SweepConfig::with_defaults(physics.clone())
    };
    let r = run_sweep(&cfg, Execution::Sequential)?;
    let u0 = sobolev_norm(&physics.initial.resolve(&physics.grid(16)?)?, 0.0);
    // amplitudes decay as exp(-r t) with r = 2 nu / (1 + 2 alpha)
    let (ra, r0) = (2.0 * nu / (1.0 + 2.0 * 0.5), 2.0 * nu);
    let int = |a: f64| (1.0 - (-a * horizon).exp()) / a;
    let d2 = u0 * u0 * (int(2.0 * ra) + int(2.0 * r0) - 2.0 * int(ra + r0));
    close(r.paths[0].runs[0].distance.unwrap_or(f64::NAN), d2.sqrt(), 0.01, "distance")
}

fn sweep_prefix() -> Outcome {
    let a = run_sweep(&small_sweep(vec![0.5, 0.0], 2), Execution::Sequential)?;
    let b = run_sweep(&small_sweep(vec![0.5, 0.0], 4), Execution::Sequential)?;
    ensure(a.paths[..] == b.paths[..2], || "prefix changed".into())
}

fn sweep_bytes() -> Outcome {
    let cfg = small_sweep(vec![0.5, 0.25, 0.0], 3);
    let prov = Provenance {
        config_hash: "0000000000000000".into(),
        seed: cfg.seed,
    };
    let a = run_sweep(&cfg, Execution::Sequential)?;
    let b = run_sweep(&cfg, Execution::Parallel { workers: Some(3) })?;
    ensure(
        a.distance_csv(&prov) == b.distance_csv(&prov)
            && a.summary(&prov) == b.summary(&prov)
            && a.modulus_csv(&prov) == b.modulus_csv(&prov),
        || "outputs differ".into(),
    )
}

fn fit_identity() -> Outcome {
    let xs = [0.5, 1.0, 2.0, 4.0];
    let f = fit_rate(&xs, &xs)?;
    close(f.slope, 1.0, 1e-14, "slope")?;
    ensure(f.stderr < 1e-14, || format!("stderr {}", f.stderr))
}

fn fit_quadratic() -> Outcome {
    let xs = [0.5, 1.0, 2.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    close(fit_rate(&xs, &ys)?.slope, 2.0, 1e-14, "slope")
}

fn fit_noisy() -> Outcome {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use statrs::distribution::{ContinuousCDF, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let xs: Vec<f64> = (0..20).map(|i| 0.1 * 1.3f64.powi(i)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            2.0 * x.powf(1.5) * normal.inverse_cdf(u).exp()
        })
        .collect();
    let f = fit_rate(&xs, &ys)?;
    ensure((f.slope - 1.5).abs() <= 3.0 * f.stderr, || format!("slope {} +- {}", f.slope, f.stderr))
}

fn prob_zero() -> Outcome {
    ensure(estimate_probability(&[0.0; 10], 0.3)?.fraction == 0.0, || "nonzero".into())
}

fn prob_one() -> Outcome {
    ensure(estimate_probability(&[0.6; 10], 0.3)?.fraction == 1.0, || "not one".into())
}

fn prob_half() -> Outcome {
    ensure(estimate_probability(&[0.0, 0.6, 0.0, 0.6], 0.3)?.fraction == 0.5, || "not half".into())
}

fn config_defaults() -> Outcome {
    let c = parse_config("{}")?;
    ensure(
        c.grid.n == 64 && c.grid.length == 2.0 * PI && c.time.dt == 1e-3 && c.time.horizon == 1.0,
        || format!("{c:?}"),
    )
}

fn config_zero_nu() -> Outcome {
    match parse_config(r#"{"physics": {"nu": 0}}"#) {
        Err(crate::Error::Config { message, .. }) if message.contains("positive") => Ok(()),
        other => Err(format!("{other:?}").into()),
    }
}

fn config_round_trip() -> Outcome {
    let c = parse_config(r#"{"experiment": "ensemble", "grid": {"n": 32}, "ensemble": {"seed": 4}}"#)?;
    ensure(parse_config(&c.canonical())? == c, || "round trip changed the config".into())
}

/// Operator identities on `fields` random fields of resolution `n`.
pub fn diagnose(n: usize, fields: u64, seed: u64) -> Vec<CheckResult> {
    let g = Arc::new(match TorusGrid::periodic_2pi(n) {
        Ok(g) => g,
        Err(e) => {
            return vec![CheckResult {
                name: "grid",
                passed: false,
                detail: e.to_string(),
            }]
        }
    });
    let tr = SpectralTransform::new(&g);
    let mut worst = [0.0f64; 6];
    let mut equiv_ok = true;
    for f in 0..fields {
        let u = random_field(&g, seed.wrapping_add(f), 1.0, false);
        let pu = leray_project(&u);
        worst[0] = worst[0].max(diff(&leray_project(&pu), &pu) / pu.max_abs());
        worst[1] = worst[1].max(divergence_residual(&pu));
        for alpha in [0.01, 0.5, 1.0] {
            let back = helmholtz(&inverse_helmholtz(&pu, alpha).expect("alpha >= 0"), alpha).expect("alpha >= 0");
            worst[2] = worst[2].max(diff(&back, &pu) / pu.max_abs());
            let v2 = inner_product_v(&pu, &pu, alpha).expect("same grid");
            let g2 = sobolev_norm(&pu, 1.0).powi(2);
            equiv_ok &= v2 / (g.poincare_constant() + alpha) <= g2 && g2 <= v2 / alpha;
        }
        if let Ok(p) = tr.to_physical(&pu) {
            let e = p.energy_quadrature();
            worst[3] = worst[3].max((e - sobolev_norm(&pu, 0.0).powi(2)).abs() / e);
        }
        let ud = dealias(&pu);
        for alpha in [0.0, 0.1, 1.0] {
            if let Ok(b) = curl_cross(&tr, &ud, alpha) {
                let scale = sobolev_norm(&b, 0.0) * sobolev_norm(&ud, 0.0);
                let ip = inner_product_h(&b, &ud).unwrap_or(f64::INFINITY);
                worst[4] = worst[4].max(ip.abs() / scale);
            }
        }
        let (a, w) = (random_field(&g, seed ^ 0x5eed ^ f, 1.0, false), &u);
        let lhs = inner_product_h(&leray_project(&a), w).unwrap_or(f64::NAN);
        let rhs = inner_product_h(&a, &leray_project(w)).unwrap_or(f64::NAN);
        worst[5] = worst[5].max((lhs - rhs).abs() / (sobolev_norm(&a, 0.0) * sobolev_norm(w, 0.0)));
    }
    let row = |name, value: f64, tol: f64| CheckResult {
        name,
        passed: value <= tol,
        detail: format!("worst {value:.3e} (tolerance {tol:.0e})"),
    };
    vec![
        row("leray-idempotent", worst[0], 1e-14),
        row("leray-divergence", worst[1], 1e-13),
        row("leray-self-adjoint", worst[5], 1e-12),
        row("helmholtz-round-trip", worst[2], 1e-12),
        row("parseval", worst[3], 1e-12),
        row("curl-cross-cancellation", worst[4], 1e-10),
        CheckResult {
            name: "norm-equivalence",
            passed: equiv_ok,
            detail: String::new(),
        },
    ]
}
