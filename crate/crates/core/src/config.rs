//! JSON run configuration.
//!
//! Every section is optional and unknown keys are rejected. Both parse
//! failures and semantic violations are reported with a line and column.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ForcingSpec, ModeTerm};
use crate::error::{Error, Result};
use crate::harness::SweepConfig;
use crate::setup::{InitialSpec, PhysicsSpec};
use crate::stochastic::{step_count, NoiseSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Simulate,
    Sweep,
    Ensemble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_length", rename = "L", alias = "length")]
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// Used by `simulate`.
    #[serde(default)]
    pub alpha: f64,
    /// Used by `sweep` and `ensemble`.
    #[serde(default = "default_alpha_list")]
    pub alpha_list: Vec<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_horizon", rename = "T", alias = "horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the mean reference `L^2(0,T;H)` norm.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// In multiples of `dt`.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<usize>,
    #[serde(default = "default_modulus_n")]
    pub modulus_n: usize,
    #[serde(default = "default_modulus_paths")]
    pub modulus_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// Snapshot every this many steps in `simulate`; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub forcing: Vec<ModeTerm>,
    #[serde(default)]
    pub noise: Vec<Vec<ModeTerm>>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_n() -> usize {
    64
}
fn default_length() -> f64 {
    2.0 * PI
}
fn default_alpha_list() -> Vec<f64> {
    SweepConfig::dyadic_alphas(8)
}
fn default_nu() -> f64 {
    0.1
}
fn default_horizon() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_paths() -> usize {
    32
}
fn default_epsilons() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_deltas() -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}
fn default_modulus_n() -> usize {
    32
}
fn default_modulus_paths() -> usize {
    16
}
fn default_directory() -> String {
    "out".into()
}

macro_rules! impl_default_via_serde {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                serde_json::from_str("{}").expect("all fields have defaults")
            }
        }
    )*};
}
impl_default_via_serde!(GridSection, PhysicsSection, TimeSection, EnsembleSection, OutputSection, RunConfig);

/// 1-based position of the first occurrence of `"key"` in `text`.
fn locate(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    text.lines()
        .enumerate()
        .find_map(|(i, l)| l.find(&needle).map(|c| (i + 1, c + 1)))
        .unwrap_or((1, 1))
}

fn reject(text: &str, key: &str, message: impl Into<String>) -> Error {
    let (line, column) = locate(text, key);
    Error::Config {
        line,
        column,
        message: message.into(),
    }
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.check(text)?;
    Ok(cfg)
}

impl RunConfig {
    fn check(&self, text: &str) -> Result<()> {
        let g = &self.grid;
        if g.n < 8 || !g.n.is_multiple_of(2) {
            return Err(reject(text, "n", format!("grid.n must be even and at least 8, got {}", g.n)));
        }
        if !(g.length.is_finite() && g.length > 0.0) {
            return Err(reject(text, "L", "grid.L must be positive"));
        }
        let p = &self.physics;
        if !(p.nu.is_finite() && p.nu > 0.0) {
            return Err(reject(
                text,
                "nu",
                format!("physics.nu must be strictly positive (viscous model required), got {}", p.nu),
            ));
        }
        if !(p.alpha.is_finite() && p.alpha >= 0.0) {
            return Err(reject(text, "alpha", format!("physics.alpha must be nonnegative, got {}", p.alpha)));
        }
        if let Some(a) = p.alpha_list.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(reject(text, "alpha_list", format!("physics.alpha_list entries must be nonnegative, got {a}")));
        }
        for t in &self.forcing {
            t.validate()
                .map_err(|e| reject(text, "forcing", format!("forcing mode {:?}: {e}", t.mode)))?;
        }
        for (k, comp) in self.noise.iter().enumerate() {
            for t in comp {
                t.validate()
                    .map_err(|e| reject(text, "noise", format!("noise component {k}, mode {:?}: {e}", t.mode)))?;
            }
        }
        self.initial
            .validate()
            .map_err(|e| reject(text, "initial", format!("initial data: {e}")))?;
        let max_mode = self
            .forcing
            .iter()
            .chain(self.noise.iter().flatten())
            .chain(match &self.initial {
                InitialSpec::Modes { terms } => terms.as_slice(),
                InitialSpec::TaylorGreen { .. } => &[],
            })
            .flat_map(|t| t.mode)
            .map(|j| j.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        if 2 * max_mode >= g.n {
            return Err(reject(text, "mode", format!("mode index {max_mode} is not resolved on n = {}", g.n)));
        }
        step_count(self.time.horizon, self.time.dt).map_err(|e| reject(text, "dt", e.to_string()))?;
        if self.experiment != Experiment::Simulate {
            self.sweep_config()
                .validate()
                .map_err(|e| reject(text, "ensemble", e.to_string()))?;
        }
        Ok(())
    }

    pub fn physics_spec(&self) -> PhysicsSpec {
        PhysicsSpec {
            n: self.grid.n,
            length: self.grid.length,
            nu: self.physics.nu,
            forcing: ForcingSpec {
                terms: self.forcing.clone(),
            },
            noise: NoiseSpec {
                components: self.noise.clone(),
            },
            initial: self.initial.clone(),
            horizon: self.time.horizon,
            dt: self.time.dt,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let e = &self.ensemble;
        SweepConfig {
            physics: self.physics_spec(),
            alphas: self.physics.alpha_list.clone(),
            paths: e.paths,
            seed: e.seed,
            epsilons: e.epsilons.clone(),
            deltas: e.deltas.clone(),
            modulus_n: e.modulus_n,
            modulus_paths: e.modulus_paths,
            compare: self.experiment != Experiment::Ensemble,
        }
    }

    /// Canonical text: every field present, fixed key order.
    pub fn canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// First 16 hex digits of the SHA-256 of the canonical form, with the
    /// output section left out so results do not depend on where they go.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output = OutputSection::default();
        let digest = Sha256::digest(content.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
