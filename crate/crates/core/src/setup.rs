//! Serializable description of one physical setup, resolved into
//! [`ModelParams`] on demand (possibly on several resolutions).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Forcing, ForcingSpec, ModeTerm};
use crate::error::{Error, Result};
use crate::integrator::{taylor_green, ModelParams};
use crate::spectral::{leray_project, SpectralVectorField, TorusGrid};
use crate::stochastic::{NoiseCoefficients, NoiseSpec};

/// Initial velocity, identical for every alpha of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialSpec {
    TaylorGreen { amplitude: f64 },
    Modes { terms: Vec<ModeTerm> },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::TaylorGreen { amplitude: 1.0 }
    }
}

impl InitialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialSpec::TaylorGreen { amplitude } if !amplitude.is_finite() => {
                Err(Error::InvalidArgument("initial amplitude must be finite".into()))
            }
            InitialSpec::TaylorGreen { .. } => Ok(()),
            InitialSpec::Modes { terms } => terms.iter().try_for_each(ModeTerm::validate),
        }
    }

    pub fn resolve(&self, grid: &Arc<TorusGrid>) -> Result<SpectralVectorField> {
        match self {
            InitialSpec::TaylorGreen { amplitude } => taylor_green(grid, *amplitude),
            InitialSpec::Modes { terms } => {
                let f = Forcing::new(&ForcingSpec { terms: terms.clone() }, grid, 0.0)?;
                Ok(leray_project(&crate::dynamics::eval_forcing(&f, 0.0)?))
            }
        }
    }
}

/// Everything needed to build [`ModelParams`] except alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsSpec {
    pub n: usize,
    pub length: f64,
    pub nu: f64,
    pub forcing: ForcingSpec,
    pub noise: NoiseSpec,
    pub initial: InitialSpec,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        Self {
            n: 64,
            length: 2.0 * PI,
            nu: 0.1,
            forcing: ForcingSpec::default(),
            noise: NoiseSpec::default(),
            initial: InitialSpec::default(),
            horizon: 1.0,
            dt: 1e-3,
        }
    }
}

impl PhysicsSpec {
    pub fn grid(&self, n: usize) -> Result<Arc<TorusGrid>> {
        Ok(Arc::new(TorusGrid::new(self.length, n)?))
    }

    /// Parameters for stress modulus `alpha` on an `n x n` grid.
    pub fn params_on(&self, alpha: f64, n: usize) -> Result<ModelParams> {
        let grid = self.grid(n)?;
        self.params_with_grid(alpha, &grid)
    }

    pub fn params(&self, alpha: f64) -> Result<ModelParams> {
        self.params_on(alpha, self.n)
    }

    pub fn params_with_grid(&self, alpha: f64, grid: &Arc<TorusGrid>) -> Result<ModelParams> {
        let p = ModelParams {
            alpha,
            nu: self.nu,
            forcing: Forcing::new(&self.forcing, grid, self.horizon)?,
            noise: NoiseCoefficients::new(&self.noise, grid, self.horizon)?,
            horizon: self.horizon,
            dt: self.dt,
            grid: Arc::clone(grid),
            initial: self.initial.resolve(grid)?,
            nonlinear: true,
        };
        p.validate()?;
        Ok(p)
    }
}
