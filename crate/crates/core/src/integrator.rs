//! Semi-implicit Euler–Maruyama for the filtered evolution equation
//!
//! ```text
//! du + (I + aA)^{-1} (nu A u + N(u) - F) dt = (I + aA)^{-1} G dW
//! ```
//!
//! Per mode with `h = 1 / (1 + alpha |k|^2)` the update is
//!
//! ```text
//! u+ = [u + h (-dt N(u) + dt F(t) + sum_k G_k(t) dW_k)] / (1 + dt nu |k|^2 h)
//! ```
//!
//! where `N = P curl(u - alpha Delta u) x u` for `alpha > 0` and
//! `N = P (u . grad u)` for `alpha = 0`. Viscosity is implicit, the
//! nonlinearity explicit and the noise evaluated at the left point (Itô).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::{record_norms_with, NormRecord};
use crate::dynamics::{advection, curl_cross, eval_forcing, Forcing};
use crate::error::{Error, Result};
use crate::spectral::{
    leray_project, SpectralTransform, SpectralVectorField, TorusGrid,
};
use crate::stochastic::{noise_increment, step_count, NoiseCoefficients, WienerPath};

/// Physical and numerical parameters of one run.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub alpha: f64,
    pub nu: f64,
    pub forcing: Forcing,
    pub noise: NoiseCoefficients,
    pub horizon: f64,
    pub dt: f64,
    pub grid: Arc<TorusGrid>,
    pub initial: SpectralVectorField,
    /// Switch for the quadratic term; only the linear tests turn it off.
    pub nonlinear: bool,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::NegativeAlpha(self.alpha));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "viscosity must be strictly positive, got {}",
                self.nu
            )));
        }
        step_count(self.horizon, self.dt)?;
        if **self.initial.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        if !self.initial.is_divergence_free() {
            return Err(Error::NotDivergenceFree);
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        step_count(self.horizon, self.dt).unwrap_or(0)
    }

    /// Copy with a different stress modulus; everything else, including the
    /// initial datum, is shared.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

/// Taylor–Green vortex `A (sin x cos y, -cos x sin y)` on the `2 pi` torus,
/// a Stokes eigenfield with `|k|^2 = 2`.
pub fn taylor_green(grid: &Arc<TorusGrid>, amplitude: f64) -> Result<SpectralVectorField> {
    if (grid.length() - 2.0 * PI).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "the Taylor-Green field needs L = 2 pi, grid has L = {}",
            grid.length()
        )));
    }
    let mut u = SpectralVectorField::zeros(grid);
    let q = amplitude / 4.0;
    let comps = u.components_mut();
    for a in [-1i64, 1] {
        for b in [-1i64, 1] {
            let idx = grid.flat_index(a, b);
            comps[0][idx] = Complex64::new(0.0, -(a as f64) * q);
            comps[1][idx] = Complex64::new(0.0, (b as f64) * q);
        }
    }
    u.set_divergence_free(true);
    Ok(u)
}

/// Time stepper bound to one parameter set.
#[derive(Clone, Debug)]
pub struct Integrator {
    params: ModelParams,
    transform: SpectralTransform,
    filter: Vec<f64>,
    damping: Vec<f64>,
    cfl_scale: f64,
}

impl Integrator {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let transform = SpectralTransform::new(&params.grid);
        let lam = params.grid.eigenvalues();
        let filter: Vec<f64> = lam.iter().map(|l| 1.0 / (1.0 + params.alpha * l)).collect();
        let damping = lam
            .iter()
            .zip(&filter)
            .map(|(l, h)| 1.0 / (1.0 + params.dt * params.nu * l * h))
            .collect();
        let kmax = (0..params.grid.mode_count())
            .filter(|&i| params.grid.is_resolved(i))
            .map(|i| {
                let (a, b) = params.grid.wavenumber(i);
                a.abs().max(b.abs())
            })
            .fold(0.0, f64::max);
        Ok(Self {
            transform,
            filter,
            damping,
            cfl_scale: params.dt * kmax,
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn transform(&self) -> &SpectralTransform {
        &self.transform
    }

    /// Projected nonlinear term `N(u)`.
    pub fn nonlinear_term(&self, u: &SpectralVectorField) -> Result<SpectralVectorField> {
        if self.params.alpha > 0.0 {
            Ok(leray_project(&curl_cross(&self.transform, u, self.params.alpha)?))
        } else {
            advection(&self.transform, u)
        }
    }

    /// Advective CFL number `dt * k_max * sum_k |u_hat[k]|`, an upper bound
    /// on `dt * k_max * max |u|`.
    pub fn cfl_estimate(&self, u: &SpectralVectorField) -> f64 {
        let [a, b] = u.components();
        let sup = a.iter().zip(b).map(|(x, y)| x.norm().max(y.norm())).sum::<f64>();
        self.cfl_scale * sup
    }

    /// One step from `t` to `t + dt`; `step` is only used to label a blow-up.
    pub fn step(&self, u: &SpectralVectorField, t: f64, dw: &[f64], step: usize) -> Result<SpectralVectorField> {
        self.step_given(u, None, t, dw, step)
    }

    /// [`Integrator::step`] with `N(u)` supplied by the caller when already
    /// computed.
    pub fn step_given(
        &self,
        u: &SpectralVectorField,
        nonlinear: Option<&SpectralVectorField>,
        t: f64,
        dw: &[f64],
        step: usize,
    ) -> Result<SpectralVectorField> {
        let p = &self.params;
        if !u.is_divergence_free() {
            return Err(Error::NotDivergenceFree);
        }
        u.same_grid(&p.initial)?;
        let mut drive = SpectralVectorField::zeros(&p.grid);
        if p.nonlinear {
            match nonlinear {
                Some(n) => drive = drive.axpy(-p.dt, n)?,
                None => drive = drive.axpy(-p.dt, &self.nonlinear_term(u)?)?,
            }
        }
        if !p.forcing.is_zero() {
            drive = drive.axpy(p.dt, &eval_forcing(&p.forcing, t)?)?;
        }
        if !p.noise.is_empty() {
            drive = drive.add(&noise_increment(&p.noise, t, dw)?)?;
        } else if !dw.is_empty() && dw.iter().any(|&x| x != 0.0) {
            return Err(Error::DimensionMismatch {
                expected: 0,
                got: dw.len(),
            });
        }
        let mut next = u.clone();
        {
            let [na, nb] = next.components_mut();
            let [da, db] = drive.components();
            for idx in 0..na.len() {
                na[idx] = (na[idx] + da[idx] * self.filter[idx]) * self.damping[idx];
                nb[idx] = (nb[idx] + db[idx] * self.filter[idx]) * self.damping[idx];
            }
            na[0] = Complex64::new(0.0, 0.0);
            nb[0] = Complex64::new(0.0, 0.0);
        }
        next.set_divergence_free(drive.is_divergence_free());
        if !next.is_finite() {
            return Err(Error::BlowUp {
                t: t + p.dt,
                step: step + 1,
                detail: "non-finite Fourier coefficient".into(),
            });
        }
        Ok(next)
    }
}

/// Free-function form of [`Integrator::step`].
pub fn step(u: &SpectralVectorField, params: &ModelParams, t: f64, dw: &[f64]) -> Result<SpectralVectorField> {
    Integrator::new(params.clone())?.step(u, t, dw, 0)
}

/// Callback invoked with the state at every grid time `t_i`, `i = 0..=N`.
pub trait Observer {
    fn observe(&mut self, step: usize, t: f64, u: &SpectralVectorField) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(usize, f64, &SpectralVectorField) -> Result<()>,
{
    fn observe(&mut self, step: usize, t: f64, u: &SpectralVectorField) -> Result<()> {
        self(step, t, u)
    }
}

/// What a [`Trajectory`] keeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoragePolicy {
    /// Norm record at every step.
    pub norms: bool,
    /// Include the remainder norm in each record (ten extra transforms).
    pub remainder: bool,
    /// Keep every `stride`-th field snapshot.
    pub field_stride: Option<usize>,
}

impl StoragePolicy {
    pub fn scalars() -> Self {
        Self {
            norms: true,
            remainder: false,
            field_stride: None,
        }
    }

    pub fn fields(stride: usize) -> Self {
        Self {
            norms: true,
            remainder: false,
            field_stride: Some(stride),
        }
    }

    pub fn nothing() -> Self {
        Self {
            norms: false,
            remainder: false,
            field_stride: None,
        }
    }
}

/// Output of [`simulate`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub alpha: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub norms: Vec<NormRecord>,
    pub field_stride: Option<usize>,
    /// Snapshots at steps `0, stride, 2 stride, ...`.
    pub fields: Vec<SpectralVectorField>,
    pub final_state: SpectralVectorField,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Snapshot at step `i` when stored at stride one.
    pub fn field(&self, i: usize) -> Result<&SpectralVectorField> {
        match self.field_stride {
            Some(1) => self.fields.get(i).ok_or(Error::MissingSnapshots),
            _ => Err(Error::MissingSnapshots),
        }
    }

    pub fn has_full_snapshots(&self) -> bool {
        self.field_stride == Some(1) && self.fields.len() == self.times.len()
    }
}

const CFL_LIMIT: f64 = 0.5;

/// Integrate from the initial datum along `path`, calling every observer at
/// each grid time.
pub fn simulate(
    params: &ModelParams,
    path: &WienerPath,
    policy: StoragePolicy,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let integrator = Integrator::new(params.clone())?;
    run(&integrator, path, policy, observers)
}

/// [`simulate`] with a prebuilt integrator.
pub fn run(
    integrator: &Integrator,
    path: &WienerPath,
    policy: StoragePolicy,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let p = integrator.params();
    let steps = step_count(p.horizon, p.dt)?;
    if path.steps() != steps || (path.dt() - p.dt).abs() > 1e-15 * p.dt {
        return Err(Error::InvalidArgument(format!(
            "path grid ({} steps of {}) does not match the run ({} steps of {})",
            path.steps(),
            path.dt(),
            steps,
            p.dt
        )));
    }
    if path.components() != p.noise.len() && !(p.noise.is_empty() && path.increments().iter().all(|&x| x == 0.0)) {
        return Err(Error::DimensionMismatch {
            expected: p.noise.len(),
            got: path.components(),
        });
    }
    let stride = policy.field_stride.map(|s| s.max(1));
    let mut traj = Trajectory {
        alpha: p.alpha,
        dt: p.dt,
        times: Vec::with_capacity(steps + 1),
        norms: Vec::new(),
        field_stride: stride,
        fields: Vec::new(),
        final_state: p.initial.clone(),
        warnings: Vec::new(),
    };
    let mut u = p.initial.clone();
    let mut cfl_warned = false;
    for i in 0..=steps {
        let t = path.time(i);
        traj.times.push(t);
        if policy.norms {
            traj
                .norms
                .push(record_norms_with(integrator.transform(), t, &u, p.alpha, policy.remainder)?);
        }
        if let Some(s) = stride {
            if i % s == 0 {
                traj.fields.push(u.clone());
            }
        }
        for obs in observers.iter_mut() {
            obs.observe(i, t, &u)?;
        }
        if i == steps {
            break;
        }
        if !cfl_warned {
            let cfl = integrator.cfl_estimate(&u);
            if cfl > CFL_LIMIT {
                cfl_warned = true;
                traj.warnings.push(format!(
                    "CFL estimate {cfl:.3} exceeds {CFL_LIMIT} at t = {t}; consider a smaller dt"
                ));
            }
        }
        let dw = if p.noise.is_empty() { &[][..] } else { path.increment(i) };
        u = integrator.step(&u, t, dw, i)?;
    }
    traj.final_state = u;
    Ok(traj)
}
