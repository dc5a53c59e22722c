//! Nonlinear and forcing terms.
//!
//! All products are formed pointwise on the collocation lattice from
//! 2/3-truncated inputs and truncated again after the forward transform, so
//! every retained mode of a quadratic product is exact.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    curl, dealias, leray_project, SpectralTransform, SpectralVectorField, TorusGrid,
};

/// Time modulation of one Fourier term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Modulation {
    #[default]
    Constant,
    /// `cos(2 pi t / period)`
    Cosine { period: f64 },
}

impl Modulation {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Modulation::Constant => 1.0,
            Modulation::Cosine { period } => (2.0 * PI * t / period).cos(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Modulation::Cosine { period } if !(period.is_finite() && period > 0.0) => Err(
                Error::InvalidArgument(format!("cosine period must be positive, got {period}")),
            ),
            _ => Ok(()),
        }
    }
}

/// One real Fourier term `a exp(i k.x) + c.c.` with wavenumber indices
/// `mode` and complex amplitude `a = (re, im)` per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub mode: [i64; 2],
    pub amplitude: [[f64; 2]; 2],
    #[serde(default, skip_serializing_if = "is_constant")]
    pub modulation: Modulation,
}

fn is_constant(m: &Modulation) -> bool {
    *m == Modulation::Constant
}

impl ModeTerm {
    pub fn constant(mode: [i64; 2], amplitude: [[f64; 2]; 2]) -> Self {
        Self {
            mode,
            amplitude,
            modulation: Modulation::Constant,
        }
    }

    fn complex_amplitude(&self) -> [Complex64; 2] {
        self.amplitude.map(|[re, im]| Complex64::new(re, im))
    }

    /// Structural checks independent of any grid: nonzero mode,
    /// divergence-free amplitude, valid modulation.
    pub fn validate(&self) -> Result<()> {
        let [jx, jy] = self.mode;
        if jx == 0 && jy == 0 {
            return Err(Error::InvalidArgument("mode (0, 0) would break the zero-mean constraint".into()));
        }
        let [a, b] = self.complex_amplitude();
        if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        let div = a * jx as f64 + b * jy as f64;
        let scale = a.norm().max(b.norm()) * (jx as f64).hypot(jy as f64);
        if div.norm() > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "mode ({jx}, {jy}) amplitude is not divergence-free (j . a = {div})"
            )));
        }
        self.modulation.validate()
    }

    fn field(&self, grid: &Arc<TorusGrid>) -> Result<SpectralVectorField> {
        self.validate()?;
        let f = SpectralVectorField::single_mode(grid, (self.mode[0], self.mode[1]), self.complex_amplitude())?;
        Ok(leray_project(&f))
    }
}

/// Deterministic body force as a finite divergence-free Fourier sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForcingSpec {
    pub terms: Vec<ModeTerm>,
}

impl ForcingSpec {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(ModeTerm::validate)
    }
}

/// A [`ForcingSpec`] resolved on a grid over the horizon `[0, T]`.
#[derive(Clone, Debug)]
pub struct Forcing {
    grid: Arc<TorusGrid>,
    terms: Vec<(SpectralVectorField, Modulation)>,
    horizon: f64,
}

impl Forcing {
    pub fn new(spec: &ForcingSpec, grid: &Arc<TorusGrid>, horizon: f64) -> Result<Self> {
        let terms = spec
            .terms
            .iter()
            .map(|t| Ok((t.field(grid)?, t.modulation)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: Arc::clone(grid),
            terms,
            horizon,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Force field `F(t)`.
pub fn eval_forcing(forcing: &Forcing, t: f64) -> Result<SpectralVectorField> {
    // half an ulp of slack so that accumulated step times still land inside
    let slack = 1e-12 * forcing.horizon.max(1.0);
    if !(t >= -slack && t <= forcing.horizon + slack) {
        return Err(Error::OutsideHorizon {
            t,
            horizon: forcing.horizon,
        });
    }
    let mut out = SpectralVectorField::zeros(&forcing.grid);
    for (field, modulation) in &forcing.terms {
        out = out.axpy(modulation.factor(t), field)?;
    }
    Ok(out)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        Err(Error::NegativeAlpha(alpha))
    } else {
        Ok(())
    }
}

/// `i k_dir c`.
fn derivative(grid: &TorusGrid, c: &[Complex64], dir: usize) -> Vec<Complex64> {
    let k = if dir == 0 { grid.kx() } else { grid.ky() };
    c.iter().zip(k).map(|(z, &k)| Complex64::new(-z.im * k, z.re * k)).collect()
}

fn add_into(acc: &mut [Complex64], x: &[Complex64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b * scale;
    }
}

fn truncate(grid: &TorusGrid, c: &mut [Complex64]) {
    for (z, &keep) in c.iter_mut().zip(grid.dealias_mask()) {
        if !keep {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Forward-transform two products and truncate both.
fn products_to_spectral(tr: &SpectralTransform, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let (mut pa, mut pb) = tr.pair_to_spectral(a, b);
    truncate(tr.grid(), &mut pa);
    truncate(tr.grid(), &mut pb);
    (pa, pb)
}

/// Scalar `omega_alpha = curl(u - alpha Delta u)` coefficients, i.e.
/// `(1 + alpha |k|^2) curl(u)` mode by mode.
pub fn curl_alpha(u: &SpectralVectorField, alpha: f64) -> Result<Vec<Complex64>> {
    check_alpha(alpha)?;
    let lam = u.grid().eigenvalues();
    let mut w = curl(u);
    if alpha > 0.0 {
        w.iter_mut().zip(lam).for_each(|(z, &l)| *z *= 1.0 + alpha * l);
    }
    Ok(w)
}

/// `curl(u - alpha Delta u) x u = omega_alpha * (-u2, u1)`, dealiased and
/// **not** Leray-projected.
pub fn curl_cross(tr: &SpectralTransform, u: &SpectralVectorField, alpha: f64) -> Result<SpectralVectorField> {
    check_alpha(alpha)?;
    if !Arc::ptr_eq(tr.grid(), u.grid()) && **tr.grid() != **u.grid() {
        return Err(Error::GridMismatch);
    }
    let ud = dealias(u);
    let w = curl_alpha(&ud, alpha)?;
    let (u1, u2) = tr.pair_to_physical(ud.component(0), ud.component(1));
    let wp = tr.scalar_to_physical(&w);
    let p1: Vec<f64> = wp.iter().zip(&u2).map(|(w, v)| -w * v).collect();
    let p2: Vec<f64> = wp.iter().zip(&u1).map(|(w, v)| w * v).collect();
    let (a, b) = products_to_spectral(tr, &p1, &p2);
    SpectralVectorField::from_coefficients(tr.grid(), [a, b]).map(|f| f.with_flag(false))
}

/// `u . grad u` before projection.
pub fn advection_unprojected(tr: &SpectralTransform, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    if !Arc::ptr_eq(tr.grid(), v.grid()) && **tr.grid() != **v.grid() {
        return Err(Error::GridMismatch);
    }
    let g = tr.grid();
    let vd = dealias(v);
    let [c1, c2] = vd.components();
    let (v1, v2) = tr.pair_to_physical(c1, c2);
    let (d1x, d1y) = tr.pair_to_physical(&derivative(g, c1, 0), &derivative(g, c1, 1));
    let (d2x, d2y) = tr.pair_to_physical(&derivative(g, c2, 0), &derivative(g, c2, 1));
    let m = g.mode_count();
    let mut a1 = Vec::with_capacity(m);
    let mut a2 = Vec::with_capacity(m);
    for i in 0..m {
        a1.push(v1[i] * d1x[i] + v2[i] * d1y[i]);
        a2.push(v1[i] * d2x[i] + v2[i] * d2y[i]);
    }
    let (a, b) = products_to_spectral(tr, &a1, &a2);
    SpectralVectorField::from_coefficients(g, [a, b]).map(|f| f.with_flag(false))
}

/// `P(v . grad v)`.
pub fn advection(tr: &SpectralTransform, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    Ok(leray_project(&advection_unprojected(tr, v)?))
}

/// The three double sums of the second-grade remainder, each projected,
/// without the factor alpha:
///
/// * `sum_{i,k} d_i d_k (u_i d_k u)`
/// * `sum_{i,k} d_i (d_k u_i d_k u)`
/// * `sum_{i,k} d_k (d_k u_i grad u_i)`
pub fn remainder_terms(tr: &SpectralTransform, u: &SpectralVectorField) -> Result<[SpectralVectorField; 3]> {
    if !Arc::ptr_eq(tr.grid(), u.grid()) && **tr.grid() != **u.grid() {
        return Err(Error::GridMismatch);
    }
    let g = tr.grid();
    let m = g.mode_count();
    let ud = dealias(u);
    let c = ud.components();
    // grad[l][k] = d_k u_l
    let spectral_grad: [[Vec<Complex64>; 2]; 2] =
        std::array::from_fn(|l| std::array::from_fn(|k| derivative(g, &c[l], k)));
    let (u1, u2) = tr.pair_to_physical(&c[0], &c[1]);
    let up = [u1, u2];
    let (g00, g01) = tr.pair_to_physical(&spectral_grad[0][0], &spectral_grad[0][1]);
    let (g10, g11) = tr.pair_to_physical(&spectral_grad[1][0], &spectral_grad[1][1]);
    let gp = [[g00, g01], [g10, g11]];

    // term 1: products u_i d_k u_l, then d_i d_k, summed over i, k
    let mut t1 = [vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m]];
    for i in 0..2 {
        for k in 0..2 {
            let p0: Vec<f64> = (0..m).map(|x| up[i][x] * gp[0][k][x]).collect();
            let p1: Vec<f64> = (0..m).map(|x| up[i][x] * gp[1][k][x]).collect();
            let (s0, s1) = products_to_spectral(tr, &p0, &p1);
            for (l, s) in [s0, s1].into_iter().enumerate() {
                let d = derivative(g, &derivative(g, &s, k), i);
                add_into(&mut t1[l], &d, 1.0);
            }
        }
    }

    // S_{il} = sum_k d_k u_i d_k u_l and T_{kl} = sum_i d_k u_i d_l u_i, both symmetric
    let sym = |f: &dyn Fn(usize, usize, usize) -> f64| -> [Vec<f64>; 3] {
        [(0, 0), (0, 1), (1, 1)].map(|(a, b)| (0..m).map(|x| f(a, b, x)).collect())
    };
    let s = sym(&|i, l, x| (0..2).map(|k| gp[i][k][x] * gp[l][k][x]).sum());
    let t = sym(&|k, l, x| (0..2).map(|i| gp[i][k][x] * gp[i][l][x]).sum());
    let (s00, s01) = products_to_spectral(tr, &s[0], &s[1]);
    let (s11, t00) = products_to_spectral(tr, &s[2], &t[0]);
    let (t01, t11) = products_to_spectral(tr, &t[1], &t[2]);
    let s_hat = [[&s00, &s01], [&s01, &s11]];
    let t_hat = [[&t00, &t01], [&t01, &t11]];

    // term 2: sum_i d_i S_{il}; term 3: sum_k d_k T_{kl}
    let mut t2 = [vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m]];
    let mut t3 = [vec![Complex64::new(0.0, 0.0); m], vec![Complex64::new(0.0, 0.0); m]];
    for l in 0..2 {
        for i in 0..2 {
            add_into(&mut t2[l], &derivative(g, s_hat[i][l], i), 1.0);
            add_into(&mut t3[l], &derivative(g, t_hat[i][l], i), 1.0);
        }
    }
    let wrap = |c: [Vec<Complex64>; 2]| -> Result<SpectralVectorField> {
        Ok(leray_project(&SpectralVectorField::from_coefficients(g, c)?))
    };
    Ok([wrap(t1)?, wrap(t2)?, wrap(t3)?])
}

/// Second-grade remainder
/// `R(u) = alpha P sum_{i,k} [d_i d_k (u_i d_k u) - d_i (d_k u_i d_k u) + d_k (d_k u_i grad u_i)]`.
///
/// It is exactly the gap between plain advection and the curl form,
/// `P(u . grad u) - P(curl(u - alpha Delta u) x u) = R(u)`, and vanishes for
/// `alpha = 0`.
pub fn remainder(tr: &SpectralTransform, u: &SpectralVectorField, alpha: f64) -> Result<SpectralVectorField> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(SpectralVectorField::zeros(u.grid()));
    }
    let [t1, t2, t3] = remainder_terms(tr, u)?;
    Ok(t1.sub(&t2)?.add(&t3)?.scaled(alpha))
}
