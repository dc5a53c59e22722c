//! Norm functionals, trajectory distances and the estimators behind the
//! moment, increment and energy checks.

use std::collections::VecDeque;

use crate::dynamics::{curl_alpha, eval_forcing};
use crate::error::{Error, Result};
use crate::integrator::{ModelParams, Observer, Trajectory};
use crate::dynamics::remainder;
use crate::spectral::{
    gradient_inner_product, helmholtz, inner_product_h, inner_product_v, inverse_helmholtz, sobolev_norm,
    SpectralTransform, SpectralVectorField,
};
use crate::stochastic::WienerPath;

/// Norms of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    /// `|u|`
    pub h: f64,
    /// `||u|| = |grad u|`
    pub grad: f64,
    /// `|u|_V = (|u|^2 + alpha ||u||^2)^{1/2}`
    pub v: f64,
    /// `|u|_W = |curl(u - alpha Delta u)|`
    pub w: f64,
    /// `|R(u)|_{H^-4}`, when requested.
    pub remainder: Option<f64>,
}

/// L2 norm of a scalar coefficient array.
fn scalar_l2(length: f64, c: &[num_complex::Complex64]) -> f64 {
    length * c.iter().skip(1).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// All five norms of `u`.
pub fn record_norms(tr: &SpectralTransform, u: &SpectralVectorField, alpha: f64) -> Result<NormRecord> {
    record_norms_with(tr, 0.0, u, alpha, true)
}

pub fn record_norms_with(
    tr: &SpectralTransform,
    t: f64,
    u: &SpectralVectorField,
    alpha: f64,
    with_remainder: bool,
) -> Result<NormRecord> {
    let h = sobolev_norm(u, 0.0);
    let grad = sobolev_norm(u, 1.0);
    let v = (h * h + alpha * grad * grad).sqrt();
    let w = scalar_l2(u.grid().length(), &curl_alpha(u, alpha)?);
    let remainder = if with_remainder {
        Some(sobolev_norm(&remainder(tr, u, alpha)?, -4.0))
    } else {
        None
    };
    Ok(NormRecord {
        t,
        h,
        grad,
        v,
        w,
        remainder,
    })
}

/// `Phi = (I + alpha A) u`, the forward Helmholtz image.
pub fn helmholtz_image(u: &SpectralVectorField, alpha: f64) -> Result<SpectralVectorField> {
    helmholtz(u, alpha)
}

fn check_same_grid(a: &Trajectory, b: &Trajectory) -> Result<usize> {
    if a.times.len() != b.times.len()
        || a.dt.to_bits() != b.dt.to_bits()
        || a.times.iter().zip(&b.times).any(|(x, y)| x.to_bits() != y.to_bits())
    {
        return Err(Error::InvalidArgument("trajectories live on different time grids".into()));
    }
    match (a.field_stride, b.field_stride) {
        (Some(s), Some(r)) if s == r => Ok(s),
        _ => Err(Error::MissingSnapshots),
    }
}

/// Left-endpoint `L^2(0, T; H)` distance between two stored trajectories.
pub fn l2t_h_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let stride = check_same_grid(a, b)?;
    let steps = a.steps();
    let mut sum = 0.0;
    for (k, (x, y)) in a.fields.iter().zip(&b.fields).enumerate() {
        if k * stride >= steps {
            break;
        }
        let d = sobolev_norm(&x.sub(y)?, 0.0);
        sum += d * d;
    }
    Ok((sum * a.dt * stride as f64).sqrt())
}

fn shift_count(delta: f64, dt: f64) -> Result<usize> {
    let d = (delta / dt).round();
    if !(delta > 0.0) || (d * dt - delta).abs() > 1e-9 * dt || d < 1.0 {
        return Err(Error::InvalidArgument(format!("delta = {delta} is not a positive multiple of dt = {dt}")));
    }
    Ok(d as usize)
}

/// Squared `H^-4` increments `|u(t_{j+s}) - u(t_j)|^2` for shifts
/// `s = 1..=max_shift`, accumulated while a trajectory streams past.
#[derive(Clone, Debug)]
pub struct IncrementTable {
    max_shift: usize,
    weights: Vec<f64>,
    recent: VecDeque<SpectralVectorField>,
    // table[s - 1][j] = |u_{j+s} - u_j|^2
    table: Vec<Vec<f64>>,
    steps_seen: usize,
}

impl IncrementTable {
    pub fn new(max_shift: usize) -> Self {
        Self {
            max_shift,
            weights: Vec::new(),
            recent: VecDeque::with_capacity(max_shift + 1),
            table: vec![Vec::new(); max_shift],
            steps_seen: 0,
        }
    }

    fn distance_sq(&self, a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
        let [a0, a1] = a.components();
        let [b0, b1] = b.components();
        let mut s = 0.0;
        for (idx, w) in self.weights.iter().enumerate().skip(1) {
            s += w * ((a0[idx] - b0[idx]).norm_sqr() + (a1[idx] - b1[idx]).norm_sqr());
        }
        let l = a.grid().length();
        l * l * s
    }

    pub fn push(&mut self, u: &SpectralVectorField) {
        if self.weights.is_empty() {
            self.weights = u.grid().eigenvalues().iter().map(|&l| if l > 0.0 { l.powi(-4) } else { 0.0 }).collect();
        }
        for (back, prev) in self.recent.iter().rev().enumerate() {
            let d = self.distance_sq(u, prev);
            self.table[back].push(d);
        }
        self.recent.push_back(u.clone());
        if self.recent.len() > self.max_shift {
            self.recent.pop_front();
        }
        self.steps_seen += 1;
    }

    /// Number of grid intervals `N` seen so far.
    pub fn steps(&self) -> usize {
        self.steps_seen.saturating_sub(1)
    }

    /// `dt * max_{0 < |s| <= d} sum_j |u(t_j + s dt) - u(t_j)|^2` over
    /// `t_j <= T - d dt` with `t_j + s dt` inside `[0, T]`.
    pub fn modulus(&self, d: usize, dt: f64) -> Result<f64> {
        let n = self.steps();
        if d == 0 || d > self.max_shift || d > n {
            return Err(Error::InvalidArgument(format!(
                "shift {d} outside 1..={}",
                self.max_shift.min(n)
            )));
        }
        let mut best = 0.0_f64;
        for s in 1..=d {
            let row = &self.table[s - 1];
            // theta = +s: j = 0..=n-d
            let forward: f64 = row[..=n - d].iter().sum();
            // theta = -s: j = s..=n-d, i.e. row index j - s = 0..=n-d-s
            let backward: f64 = if n - d >= s { row[..=n - d - s].iter().sum() } else { 0.0 };
            best = best.max(forward).max(backward);
        }
        Ok(dt * best)
    }
}

impl Observer for IncrementTable {
    fn observe(&mut self, _step: usize, _t: f64, u: &SpectralVectorField) -> Result<()> {
        self.push(u);
        Ok(())
    }
}

/// Grid estimator of `sup_{|theta| <= delta} int_0^{T - delta} |u(t + theta) - u(t)|^2_{H^-4} dt`
/// for one trajectory; needs snapshots at every step.
pub fn increment_modulus(traj: &Trajectory, delta: f64) -> Result<f64> {
    if !traj.has_full_snapshots() {
        return Err(Error::MissingSnapshots);
    }
    let d = shift_count(delta, traj.dt)?;
    if d > traj.steps() {
        return Err(Error::InvalidArgument(format!("delta = {delta} exceeds the horizon")));
    }
    let mut table = IncrementTable::new(d);
    traj.fields.iter().for_each(|u| table.push(u));
    table.modulus(d, traj.dt)
}

/// Residual of the discrete Itô energy balance over one step:
///
/// ```text
/// |u+|_V^2 - |u|_V^2 + 2 nu ||u||^2 dt - 2 (F, u) dt - |G_hat|_V^2 dt - 2 sum_k (G_k, u) dW_k
/// ```
///
/// with `G_hat = (I + alpha A)^{-1} G`; `(G_hat_k, u)_V = (G_k, u)`.
pub fn energy_residual_step(
    params: &ModelParams,
    u: &SpectralVectorField,
    next: &SpectralVectorField,
    t: f64,
    dw: &[f64],
) -> Result<f64> {
    let a = params.alpha;
    let dt = params.dt;
    let mut r = inner_product_v(next, next, a)? - inner_product_v(u, u, a)?;
    r += 2.0 * params.nu * gradient_inner_product(u, u)? * dt;
    if !params.forcing.is_zero() {
        r -= 2.0 * inner_product_h(&eval_forcing(&params.forcing, t)?, u)? * dt;
    }
    for (k, &d) in dw.iter().enumerate().take(params.noise.len()) {
        let g = params.noise.component(k, t)?;
        let gh = inverse_helmholtz(&g, a)?;
        r -= inner_product_v(&gh, &gh, a)? * dt;
        r -= 2.0 * inner_product_h(&g, u)? * d;
    }
    Ok(r)
}

/// Per-step energy residuals of a trajectory stored at stride one.
pub fn energy_residual(traj: &Trajectory, path: &WienerPath, params: &ModelParams) -> Result<Vec<f64>> {
    if !traj.has_full_snapshots() {
        return Err(Error::MissingSnapshots);
    }
    if path.steps() != traj.steps() {
        return Err(Error::InvalidArgument("path does not match trajectory".into()));
    }
    (0..traj.steps())
        .map(|i| {
            let dw = if params.noise.is_empty() { &[][..] } else { path.increment(i) };
            energy_residual_step(params, &traj.fields[i], &traj.fields[i + 1], traj.times[i], dw)
        })
        .collect()
}

/// Streaming version of [`energy_residual`]: keeps only the previous state.
pub struct EnergyResidualObserver<'a> {
    params: &'a ModelParams,
    path: &'a WienerPath,
    previous: Option<SpectralVectorField>,
    pub residuals: Vec<f64>,
}

impl<'a> EnergyResidualObserver<'a> {
    pub fn new(params: &'a ModelParams, path: &'a WienerPath) -> Self {
        Self {
            params,
            path,
            previous: None,
            residuals: Vec::new(),
        }
    }
}

impl Observer for EnergyResidualObserver<'_> {
    fn observe(&mut self, step: usize, _t: f64, u: &SpectralVectorField) -> Result<()> {
        if let Some(prev) = self.previous.take() {
            let i = step - 1;
            let dw = if self.params.noise.is_empty() { &[][..] } else { self.path.increment(i) };
            let r = energy_residual_step(self.params, &prev, u, self.path.time(i), dw)?;
            self.residuals.push(r);
        }
        self.previous = Some(u.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::dynamics::{Forcing, ForcingSpec, ModeTerm};
    use crate::integrator::{simulate, StoragePolicy};
    use crate::spectral::TorusGrid;
    use crate::stochastic::{sample_wiener_path, NoiseCoefficients, NoiseSpec};
    use crate::testing::random_solenoidal;

    fn grid(n: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::periodic_2pi(n).unwrap())
    }

    fn trajectory(fields: Vec<SpectralVectorField>, dt: f64) -> Trajectory {
        Trajectory {
            alpha: 0.0,
            dt,
            times: (0..fields.len()).map(|i| i as f64 * dt).collect(),
            norms: Vec::new(),
            field_stride: Some(1),
            final_state: fields.last().unwrap().clone(),
            fields,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn norms_of_zero_and_alpha_collapse() {
        let g = grid(16);
        let tr = SpectralTransform::new(&g);
        let r = record_norms(&tr, &SpectralVectorField::zeros(&g), 0.5).unwrap();
        assert_eq!((r.h, r.grad, r.v, r.w, r.remainder), (0.0, 0.0, 0.0, 0.0, Some(0.0)));
        let u = random_solenoidal(&g, 3, 1.0, true);
        let r = record_norms(&tr, &u, 0.0).unwrap();
        assert_eq!(r.v, r.h);
        // |curl u| = ||u|| for solenoidal mean-zero fields
        assert!((r.w - r.grad).abs() < 1e-12 * r.grad);
        assert_eq!(r.remainder, Some(0.0));
    }

    #[test]
    fn w_norm_single_mode() {
        // j = (0, 1), u = (a e^{iy} + c.c., 0): curl u has coefficient -i a at
        // (0, 1); with alpha = 1 and lambda = 1 the W-norm doubles it.
        let g = grid(16);
        let tr = SpectralTransform::new(&g);
        let a = Complex64::new(0.3, -0.4);
        let u = SpectralVectorField::single_mode(&g, (0, 1), [a, Complex64::new(0.0, 0.0)]).unwrap();
        let r = record_norms(&tr, &u, 1.0).unwrap();
        let curl_part = g.length() * (2.0 * a.norm_sqr()).sqrt();
        assert!((r.w - 2.0 * curl_part).abs() < 1e-14 * r.w);
        assert!((r.w - 2.0 * r.h).abs() < 1e-14 * r.w);
    }

    #[test]
    fn norm_equivalence_and_phi_comparison() {
        let g = grid(32);
        let tr = SpectralTransform::new(&g);
        let pc = g.poincare_constant();
        for seed in 0..10 {
            let u = random_solenoidal(&g, seed, 1.0, true);
            for alpha in [0.01, 0.5, 1.0] {
                let r = record_norms_with(&tr, 0.0, &u, alpha, false).unwrap();
                let v2 = r.v * r.v;
                let g2 = r.grad * r.grad;
                assert!(v2 / (pc + alpha) <= g2 * (1.0 + 1e-14));
                assert!(g2 <= v2 / alpha * (1.0 + 1e-14));
                assert!(r.h <= r.v);
                let phi = helmholtz_image(&u, alpha).unwrap();
                assert!(sobolev_norm(&u, -4.0) < sobolev_norm(&phi, -4.0));
            }
        }
    }

    #[test]
    fn distance_cases() {
        let g = grid(8);
        let c = random_solenoidal(&g, 1, 1.0, false);
        let z = SpectralVectorField::zeros(&g);
        let dt = 0.1;
        let a = trajectory(vec![c.clone(); 11], dt);
        let b = trajectory(vec![z; 11], dt);
        assert_eq!(l2t_h_distance(&a, &a).unwrap(), 0.0);
        let d = l2t_h_distance(&a, &b).unwrap();
        let expect = sobolev_norm(&c, 0.0) * 1.0f64.sqrt();
        assert!((d - expect).abs() < 1e-12 * expect);
        let a2 = trajectory(vec![c.scaled(2.0); 11], dt);
        assert!((l2t_h_distance(&a2, &b).unwrap() - 2.0 * d).abs() < 1e-12 * d);
        let short = trajectory(vec![c; 5], dt);
        assert!(l2t_h_distance(&a, &short).is_err());
    }

    #[test]
    fn modulus_cases() {
        let g = grid(8);
        let c = random_solenoidal(&g, 1, 1.0, false);
        let dt = 0.01;
        let constant = trajectory(vec![c.clone(); 21], dt);
        assert_eq!(increment_modulus(&constant, 0.05).unwrap(), 0.0);

        let e = random_solenoidal(&g, 2, 1.0, false);
        let two = trajectory(vec![c.clone(), c.add(&e).unwrap()], dt);
        let got = increment_modulus(&two, dt).unwrap();
        let expect = dt * sobolev_norm(&e, -4.0).powi(2);
        assert!((got - expect).abs() < 1e-14 * expect);

        // u(t) = t e: every increment at shift s is (s dt)^2 |e|^2, with N - d + 1 terms
        let n = 40;
        let ramp = trajectory((0..=n).map(|i| e.scaled(i as f64 * dt)).collect(), dt);
        let e2 = sobolev_norm(&e, -4.0).powi(2);
        let mut last = 0.0;
        for d in [1usize, 2, 4, 8] {
            let got = increment_modulus(&ramp, d as f64 * dt).unwrap();
            let expect = dt * (n - d + 1) as f64 * (d as f64 * dt).powi(2) * e2;
            assert!((got - expect).abs() < 1e-12 * expect, "d = {d}");
            assert!(got >= last);
            last = got;
        }
        assert!(increment_modulus(&ramp, 0.015).is_err());
        let mut decimated = ramp.clone();
        decimated.field_stride = Some(2);
        assert!(matches!(increment_modulus(&decimated, dt), Err(Error::MissingSnapshots)));
    }

    fn noisy_params(g: &Arc<TorusGrid>, dt: f64, horizon: f64, with_noise: bool) -> ModelParams {
        let noise = if with_noise {
            NoiseSpec {
                components: vec![
                    vec![ModeTerm::constant([1, 0], [[0.0, 0.0], [0.4, 0.0]])],
                    vec![ModeTerm::constant([1, 1], [[0.0, 0.2], [0.0, -0.2]])],
                ],
            }
        } else {
            NoiseSpec::default()
        };
        ModelParams {
            alpha: 0.25,
            nu: 0.1,
            forcing: Forcing::new(&ForcingSpec::default(), g, horizon).unwrap(),
            noise: NoiseCoefficients::new(&noise, g, horizon).unwrap(),
            horizon,
            dt,
            grid: Arc::clone(g),
            initial: random_solenoidal(g, 5, 2.0, true),
            nonlinear: false,
        }
    }

    #[test]
    fn energy_residual_zero_trajectory() {
        let g = grid(8);
        let mut p = noisy_params(&g, 0.1, 1.0, false);
        p.initial = SpectralVectorField::zeros(&g);
        let path = WienerPath::zero(1.0, 0.1, 0).unwrap();
        let t = simulate(&p, &path, StoragePolicy::fields(1), &mut []).unwrap();
        assert!(energy_residual(&t, &path, &p).unwrap().iter().all(|&r| r == 0.0));
        let scalars = simulate(&p, &path, StoragePolicy::scalars(), &mut []).unwrap();
        assert!(matches!(energy_residual(&scalars, &path, &p), Err(Error::MissingSnapshots)));
    }

    #[test]
    fn deterministic_linear_residual_is_first_order() {
        // per-step residual ~ dt^2, so the accumulated one halves with dt
        let g = grid(16);
        let mut total = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let p = noisy_params(&g, dt, 1.0, false);
            let path = WienerPath::zero(1.0, dt, 0).unwrap();
            let t = simulate(&p, &path, StoragePolicy::fields(1), &mut []).unwrap();
            let r = energy_residual(&t, &path, &p).unwrap();
            let max_step = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert!(max_step < 50.0 * dt * dt, "dt {dt}: {max_step}");
            total.push(r.iter().sum::<f64>().abs());
        }
        for w in total.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.8..2.2).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn streaming_residual_matches_stored() {
        let g = grid(16);
        let p = noisy_params(&g, 0.01, 0.2, true);
        let path = sample_wiener_path(0.2, 0.01, 2, 3, 0).unwrap();
        let mut obs = EnergyResidualObserver::new(&p, &path);
        let t = simulate(&p, &path, StoragePolicy::fields(1), &mut [&mut obs]).unwrap();
        let stored = energy_residual(&t, &path, &p).unwrap();
        assert_eq!(stored, obs.residuals);
    }

    #[test]
    fn stochastic_residual_has_zero_mean() {
        let g = grid(8);
        let dt = 0.01;
        let p = noisy_params(&g, dt, 0.1, true);
        let paths = 256;
        let mut sums = Vec::new();
        for k in 0..paths {
            let path = sample_wiener_path(0.1, dt, 2, 77, k).unwrap();
            let mut obs = EnergyResidualObserver::new(&p, &path);
            simulate(&p, &path, StoragePolicy::nothing(), &mut [&mut obs]).unwrap();
            sums.push(obs.residuals.iter().sum::<f64>());
        }
        let mean = sums.iter().sum::<f64>() / paths as f64;
        let sd = (sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths - 1) as f64).sqrt();
        assert!(sums.iter().any(|&x| x > 0.0) && sums.iter().any(|&x| x < 0.0));
        assert!(mean.abs() < 4.0 * sd / (paths as f64).sqrt(), "mean {mean} sd {sd}");
    }
}
