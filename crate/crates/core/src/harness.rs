//! Monte Carlo experiments over an alpha sweep.
//!
//! Every path index draws one Wiener path and drives all alpha runs, the
//! Navier–Stokes (`alpha = 0`) reference included, with the same increments.
//! The runs of one path advance in lockstep so distances to the reference are
//! accumulated without storing trajectories. Jobs are independent and their
//! results are reduced in a fixed order, so the report does not depend on the
//! worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::diagnostics::IncrementTable;
use crate::dynamics::advection;
#[cfg(doc)]
use crate::dynamics::remainder;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::integrator::{run, Integrator, StoragePolicy};
use crate::setup::PhysicsSpec;
use crate::spectral::{distance_sq, sobolev_norm};
use crate::stochastic::{sample_wiener_path, step_count};

/// Largest tolerated fraction of blown-up runs.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub physics: PhysicsSpec,
    /// Strictly descending; contains 0 exactly once when `compare` is set.
    pub alphas: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    /// Thresholds relative to the mean `L^2(0,T;H)` norm of the reference.
    pub epsilons: Vec<f64>,
    /// Shifts for the increment modulus, in multiples of `dt`.
    pub deltas: Vec<usize>,
    pub modulus_n: usize,
    pub modulus_paths: usize,
    /// Distances to the reference and remainder norms (full sweep); off for
    /// moment/modulus-only ensembles.
    pub compare: bool,
}

impl SweepConfig {
    /// Dyadic alphas `2^-1 .. 2^-levels`, then 0.
    pub fn dyadic_alphas(levels: i32) -> Vec<f64> {
        let mut a: Vec<f64> = (1..=levels).map(|j| 0.5f64.powi(j)).collect();
        a.push(0.0);
        a
    }

    pub fn with_defaults(physics: PhysicsSpec) -> Self {
        Self {
            physics,
            alphas: Self::dyadic_alphas(8),
            paths: 32,
            seed: 0,
            epsilons: vec![0.05, 0.1, 0.2],
            deltas: vec![2, 4, 8, 16, 32],
            modulus_n: 32,
            modulus_paths: 16,
            compare: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.alphas.is_empty() {
            return bad("alpha list is empty".into());
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::NegativeAlpha(
                *self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)).unwrap(),
            ));
        }
        if self.alphas.windows(2).any(|w| w[1] >= w[0]) {
            return bad("alpha list must be strictly descending".into());
        }
        if self.compare && self.alphas.iter().filter(|&&a| a == 0.0).count() != 1 {
            return bad("alpha list must contain 0 exactly once".into());
        }
        if self.paths == 0 {
            return bad("path count must be at least 1".into());
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("epsilon thresholds must be positive".into());
        }
        let steps = step_count(self.physics.horizon, self.physics.dt)?;
        if self.deltas.iter().any(|&d| d == 0 || d > steps) || self.deltas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("deltas must be ascending multiples of dt inside (0, T]".into());
        }
        if !self.deltas.is_empty() && self.modulus_paths == 0 {
            return bad("modulus path count must be at least 1".into());
        }
        Ok(())
    }

    fn reference_index(&self) -> Option<usize> {
        self.alphas.iter().position(|&a| a == 0.0)
    }
}

/// Per-(alpha, path) outcome of the coupled run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// `L^2(0,T;H)` distance to the reference; `None` if either run blew up
    /// or no comparison was requested.
    pub distance: Option<f64>,
    pub excluded: bool,
    /// `sup_t (|u|^2 + alpha ||u||^2)`
    pub sup_energy: f64,
    /// `int_0^T ||u||^2 dt`
    pub dissipation: f64,
    /// `|R(u)|_{L^2(0,T;H^-4)}`
    pub remainder: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub index: u64,
    /// Digest of the increments every alpha run of this path consumed.
    pub checksum: u64,
    pub reference_norm: Option<f64>,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Half width of the 95% confidence interval of the slope.
    pub ci95: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probability {
    pub fraction: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub included: usize,
    pub mean_distance: Option<f64>,
    /// One entry per epsilon.
    pub probabilities: Vec<Probability>,
    pub mean_sup_energy: f64,
    pub mean_dissipation: f64,
    /// Root mean square over paths of the per-path remainder norm.
    pub remainder_rms: f64,
    /// Ensemble mean of the increment modulus, one entry per delta.
    pub modulus: Vec<f64>,
    pub modulus_fit: Option<RateFit>,
}

impl AlphaSummary {
    pub fn moment_sum(&self) -> f64 {
        self.mean_sup_energy + self.mean_dissipation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub paths: Vec<PathResult>,
    pub mean_reference_norm: Option<f64>,
    pub alphas: Vec<AlphaSummary>,
    pub distance_fit: Option<RateFit>,
    pub remainder_fit: Option<RateFit>,
    pub excluded_runs: usize,
    pub total_runs: usize,
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument("a rate fit needs at least three points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("rate fits need strictly positive data".into()));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let stderr = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::NAN);
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        ci95: t * stderr,
    })
}

/// Fraction of distances strictly above `epsilon`, with its binomial
/// standard error.
pub fn estimate_probability(distances: &[f64], epsilon: f64) -> Result<Probability> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if distances.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let m = distances.len() as f64;
    let p = distances.iter().filter(|&&d| d > epsilon).count() as f64 / m;
    Ok(Probability {
        fraction: p,
        stderr: (p * (1.0 - p) / m).sqrt(),
    })
}

struct LockstepRun {
    integrator: Integrator,
    state: crate::spectral::SpectralVectorField,
    alive: bool,
    result: RunResult,
    dist_sq: f64,
    rem_sq: f64,
    nonlinear: Option<crate::spectral::SpectralVectorField>,
}

/// `R(u) = P(u . grad u) - N(u)` given the already computed curl-form term
/// `N(u)`; equal to [`remainder`] up to roundoff on the dealiased lattice.
fn remainder_gap(
    integrator: &Integrator,
    u: &crate::spectral::SpectralVectorField,
    nonlinear: &crate::spectral::SpectralVectorField,
) -> Result<crate::spectral::SpectralVectorField> {
    advection(integrator.transform(), u)?.sub(nonlinear)
}

fn run_path(cfg: &SweepConfig, index: u64) -> Result<PathResult> {
    let phys = &cfg.physics;
    let grid = phys.grid(phys.n)?;
    let path = sample_wiener_path(phys.horizon, phys.dt, phys.noise.len(), cfg.seed, index)?;
    let steps = path.steps();
    let dt = phys.dt;
    let reference = if cfg.compare { cfg.reference_index() } else { None };
    let mut runs = cfg
        .alphas
        .iter()
        .map(|&alpha| {
            let params = phys.params_with_grid(alpha, &grid)?;
            let state = params.initial.clone();
            Ok(LockstepRun {
                integrator: Integrator::new(params)?,
                state,
                alive: true,
                result: RunResult {
                    distance: None,
                    excluded: false,
                    sup_energy: 0.0,
                    dissipation: 0.0,
                    remainder: 0.0,
                    failure: None,
                },
                dist_sq: 0.0,
                rem_sq: 0.0,
                nonlinear: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ref_sq = 0.0;

    for i in 0..=steps {
        let t = path.time(i);
        let interior = i < steps;
        for r in runs.iter_mut().filter(|r| r.alive) {
            let alpha = r.integrator.params().alpha;
            let h = sobolev_norm(&r.state, 0.0);
            let g = sobolev_norm(&r.state, 1.0);
            r.result.sup_energy = r.result.sup_energy.max(h * h + alpha * g * g);
            r.nonlinear = None;
            if interior {
                r.result.dissipation += dt * g * g;
                if cfg.compare && alpha > 0.0 {
                    let n = r.integrator.nonlinear_term(&r.state)?;
                    let rem = remainder_gap(&r.integrator, &r.state, &n)?;
                    r.rem_sq += dt * sobolev_norm(&rem, -4.0).powi(2);
                    r.nonlinear = Some(n);
                }
            }
        }
        if let Some(k) = reference {
            if runs[k].alive && interior {
                let v = runs[k].state.clone();
                ref_sq += dt * sobolev_norm(&v, 0.0).powi(2);
                for r in runs.iter_mut().filter(|r| r.alive) {
                    r.dist_sq += dt * distance_sq(&r.state, &v, 0.0)?;
                }
            }
        }
        if !interior {
            break;
        }
        let dw = path.increment(i);
        for r in runs.iter_mut().filter(|r| r.alive) {
            let dw = if r.integrator.params().noise.is_empty() { &[][..] } else { dw };
            match r.integrator.step_given(&r.state, r.nonlinear.as_ref(), t, dw, i) {
                Ok(next) => r.state = next,
                Err(e @ Error::BlowUp { .. }) => {
                    r.alive = false;
                    r.result.failure = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
    }

    let ref_alive = reference.map(|k| runs[k].alive);
    let results = runs
        .into_iter()
        .map(|r| {
            let mut res = r.result;
            res.excluded = !r.alive || ref_alive == Some(false);
            if r.alive {
                res.remainder = r.rem_sq.sqrt();
            }
            if ref_alive == Some(true) && r.alive {
                res.distance = Some(r.dist_sq.sqrt());
            }
            res
        })
        .collect();
    Ok(PathResult {
        index,
        checksum: path.checksum(),
        reference_norm: if ref_alive == Some(true) { Some(ref_sq.sqrt()) } else { None },
        runs: results,
    })
}

/// Increment modulus of one (alpha, path) run for every delta; `None` on
/// blow-up.
fn run_modulus(cfg: &SweepConfig, alpha: f64, index: u64) -> Result<Option<Vec<f64>>> {
    let phys = &cfg.physics;
    let params = phys.params_on(alpha, cfg.modulus_n)?;
    let path = sample_wiener_path(phys.horizon, phys.dt, phys.noise.len(), cfg.seed, index)?;
    let max_shift = *cfg.deltas.last().expect("deltas checked non-empty");
    let mut table = IncrementTable::new(max_shift);
    let integrator = Integrator::new(params)?;
    match run(&integrator, &path, StoragePolicy::nothing(), &mut [&mut table]) {
        Ok(_) => cfg
            .deltas
            .iter()
            .map(|&d| table.modulus(d, phys.dt))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Err(Error::BlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Run the full experiment.
pub fn run_sweep(cfg: &SweepConfig, exec: Execution) -> Result<SweepReport> {
    cfg.validate()?;
    let indices: Vec<u64> = (0..cfg.paths as u64).collect();
    let paths = map_ordered(&indices, exec, |&p| run_path(cfg, p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let modulus_jobs: Vec<(usize, u64)> = if cfg.deltas.is_empty() {
        Vec::new()
    } else {
        (0..cfg.alphas.len())
            .flat_map(|a| (0..cfg.modulus_paths as u64).map(move |p| (a, p)))
            .collect()
    };
    let modulus = map_ordered(&modulus_jobs, exec, |&(a, p)| run_modulus(cfg, cfg.alphas[a], p))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut excluded = paths.iter().flat_map(|p| &p.runs).filter(|r| r.excluded).count();
    excluded += modulus.iter().filter(|m| m.is_none()).count();
    let total = paths.len() * cfg.alphas.len() + modulus.len();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(Error::Sweep(format!(
            "{excluded} of {total} runs blew up (more than {:.0}%)",
            100.0 * MAX_EXCLUDED_FRACTION
        )));
    }

    let mean_reference_norm = mean(paths.iter().filter_map(|p| p.reference_norm));
    let mut alphas = Vec::with_capacity(cfg.alphas.len());
    for (a, &alpha) in cfg.alphas.iter().enumerate() {
        let runs: Vec<&RunResult> = paths.iter().map(|p| &p.runs[a]).filter(|r| !r.excluded).collect();
        let distances: Vec<f64> = runs.iter().filter_map(|r| r.distance).collect();
        let probabilities = match mean_reference_norm {
            Some(norm) if !distances.is_empty() => cfg
                .epsilons
                .iter()
                .map(|e| estimate_probability(&distances, e * norm))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        let mod_rows: Vec<&Vec<f64>> = modulus_jobs
            .iter()
            .zip(&modulus)
            .filter(|((ai, _), _)| *ai == a)
            .filter_map(|(_, m)| m.as_ref())
            .collect();
        let modulus_mean: Vec<f64> = (0..cfg.deltas.len())
            .map(|d| mean(mod_rows.iter().map(|r| r[d])).unwrap_or(f64::NAN))
            .collect();
        let deltas: Vec<f64> = cfg.deltas.iter().map(|&d| d as f64 * cfg.physics.dt).collect();
        alphas.push(AlphaSummary {
            alpha,
            included: runs.len(),
            mean_distance: mean(distances.iter().copied()),
            probabilities,
            mean_sup_energy: mean(runs.iter().map(|r| r.sup_energy)).unwrap_or(f64::NAN),
            mean_dissipation: mean(runs.iter().map(|r| r.dissipation)).unwrap_or(f64::NAN),
            remainder_rms: mean(runs.iter().map(|r| r.remainder * r.remainder))
                .map(f64::sqrt)
                .unwrap_or(f64::NAN),
            modulus: modulus_mean.clone(),
            modulus_fit: fit_rate(&deltas, &modulus_mean).ok(),
        });
    }

    let positive: Vec<&AlphaSummary> = alphas.iter().filter(|s| s.alpha > 0.0).collect();
    let xs: Vec<f64> = positive.iter().map(|s| s.alpha).collect();
    let distance_fit = if cfg.compare {
        let ys: Vec<f64> = positive.iter().map(|s| s.mean_distance.unwrap_or(f64::NAN)).collect();
        fit_rate(&xs, &ys).ok()
    } else {
        None
    };
    let remainder_fit = if cfg.compare {
        let ys: Vec<f64> = positive.iter().map(|s| s.remainder_rms).collect();
        fit_rate(&xs, &ys).ok()
    } else {
        None
    };

    Ok(SweepReport {
        config: cfg.clone(),
        paths,
        mean_reference_norm,
        alphas,
        distance_fit,
        remainder_fit,
        excluded_runs: excluded,
        total_runs: total,
    })
}

/// Provenance stamped into every emitted file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepReport {
    /// Coupling check: every path's runs all consumed the same increments by
    /// construction; this recomputes the path digests independently.
    pub fn verify_coupling(&self) -> Result<()> {
        let phys = &self.config.physics;
        for p in &self.paths {
            let path = sample_wiener_path(phys.horizon, phys.dt, phys.noise.len(), self.config.seed, p.index)?;
            if path.checksum() != p.checksum {
                return Err(Error::Sweep(format!("path {} checksum mismatch", p.index)));
            }
        }
        Ok(())
    }

    pub fn distance_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        s.push_str("alpha,path,distance,excluded\n");
        for (a, alpha) in self.config.alphas.iter().enumerate() {
            for p in &self.paths {
                let r = &p.runs[a];
                let _ = writeln!(s, "{},{},{},{}", alpha, p.index, opt(r.distance), r.excluded as u8);
            }
        }
        s
    }

    pub fn moments_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        s.push_str("alpha,paths,mean_sup_energy,mean_dissipation,moment_sum\n");
        for a in &self.alphas {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                a.alpha,
                a.included,
                a.mean_sup_energy,
                a.mean_dissipation,
                a.moment_sum()
            );
        }
        s
    }

    pub fn modulus_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        s.push_str("alpha,delta,modulus\n");
        for a in &self.alphas {
            for (d, m) in self.config.deltas.iter().zip(&a.modulus) {
                let _ = writeln!(s, "{},{},{}", a.alpha, *d as f64 * self.config.physics.dt, m);
            }
        }
        s
    }

    pub fn remainder_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        s.push_str("alpha,remainder_l2_h_minus4_rms\n");
        for a in &self.alphas {
            let _ = writeln!(s, "{},{}", a.alpha, a.remainder_rms);
        }
        s
    }

    pub fn probability_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        s.push_str("alpha,epsilon_relative,epsilon,fraction,stderr\n");
        let norm = self.mean_reference_norm.unwrap_or(f64::NAN);
        for a in &self.alphas {
            for (e, p) in self.config.epsilons.iter().zip(&a.probabilities) {
                let _ = writeln!(s, "{},{},{},{},{}", a.alpha, e, e * norm, p.fraction, p.stderr);
            }
        }
        s
    }

    pub fn summary(&self, prov: &Provenance) -> String {
        let mut s = prov.comment();
        let c = &self.config;
        let _ = writeln!(
            s,
            "alphas={:?} paths={} modulus_paths={} modulus_n={} n={} dt={} T={}",
            c.alphas, c.paths, c.modulus_paths, c.modulus_n, c.physics.n, c.physics.dt, c.physics.horizon
        );
        let _ = writeln!(s, "excluded_runs={} of {}", self.excluded_runs, self.total_runs);
        if let Some(n) = self.mean_reference_norm {
            let _ = writeln!(s, "reference_l2_h_norm_mean={n}");
        }
        let fit = |name: &str, f: &Option<RateFit>, s: &mut String| {
            if let Some(f) = f {
                let _ = writeln!(
                    s,
                    "{name}: slope={} stderr={} ci95=[{}, {}] intercept={}",
                    f.slope,
                    f.stderr,
                    f.slope - f.ci95,
                    f.slope + f.ci95,
                    f.intercept
                );
            }
        };
        fit("distance_vs_alpha", &self.distance_fit, &mut s);
        fit("remainder_vs_alpha", &self.remainder_fit, &mut s);
        for a in &self.alphas {
            fit(&format!("modulus_vs_delta[alpha={}]", a.alpha), &a.modulus_fit, &mut s);
        }
        s
    }

    /// Write every report file into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, prov: &Provenance) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = vec![
            ("moments.csv", self.moments_csv(prov)),
            ("modulus.csv", self.modulus_csv(prov)),
        ];
        if self.config.compare {
            files.push(("report.csv", self.distance_csv(prov)));
            files.push(("remainder.csv", self.remainder_csv(prov)));
            files.push(("probability.csv", self.probability_csv(prov)));
        }
        files.push(("summary.txt", self.summary(prov)));
        let mut written = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}
