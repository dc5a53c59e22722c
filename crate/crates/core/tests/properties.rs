use std::sync::Arc;

use proptest::prelude::*;
use sgfluid::dynamics::{advection, curl_cross, remainder};
use sgfluid::spectral::{
    helmholtz, inner_product_h, inverse_helmholtz, leray_project, sobolev_norm, stokes_apply, SpectralTransform,
    SpectralVectorField, TorusGrid,
};
use sgfluid::testing::{random_field, random_solenoidal};

fn grid(n: usize, length: f64) -> Arc<TorusGrid> {
    Arc::new(TorusGrid::new(length, n).unwrap())
}

fn max_diff(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
    a.sub(b).unwrap().max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leray_is_idempotent_and_self_adjoint(seed in any::<u64>(), other in any::<u64>(), length in 0.5f64..20.0) {
        let g = grid(16, length);
        let u = random_field(&g, seed, 1.0, false);
        let w = random_field(&g, other, 1.0, false);
        let pu = leray_project(&u);
        prop_assert!(max_diff(&leray_project(&pu), &pu) <= 1e-14 * pu.max_abs());
        let lhs = inner_product_h(&pu, &w).unwrap();
        let rhs = inner_product_h(&u, &leray_project(&w)).unwrap();
        let scale = sobolev_norm(&u, 0.0) * sobolev_norm(&w, 0.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn diagonal_operators_commute(seed in any::<u64>(), alpha in 0.0f64..5.0) {
        let g = grid(16, 2.0 * std::f64::consts::PI);
        let u = random_solenoidal(&g, seed, 1.0, false);
        let a = leray_project(&inverse_helmholtz(&stokes_apply(&u).unwrap(), alpha).unwrap());
        let b = stokes_apply(&inverse_helmholtz(&leray_project(&u), alpha).unwrap()).unwrap();
        prop_assert!(max_diff(&a, &b) <= 1e-13 * a.max_abs().max(1e-300));
        let u = random_field(&g, seed, 1.0, false);
        let back = helmholtz(&inverse_helmholtz(&u, alpha).unwrap(), alpha).unwrap();
        prop_assert!(max_diff(&back, &u) <= 1e-13 * u.max_abs());
    }

    #[test]
    fn parseval_matches_quadrature(seed in any::<u64>(), length in 0.5f64..20.0) {
        let g = grid(16, length);
        let tr = SpectralTransform::new(&g);
        let u = random_field(&g, seed, 0.5, false);
        let q = tr.to_physical(&u).unwrap().energy_quadrature();
        let s = sobolev_norm(&u, 0.0).powi(2);
        prop_assert!((q - s).abs() <= 1e-12 * q);
    }

    #[test]
    fn phi_dominates_u_in_negative_norm(seed in any::<u64>(), alpha in 1e-3f64..2.0) {
        let g = grid(16, 2.0 * std::f64::consts::PI);
        let u = random_solenoidal(&g, seed, 1.0, false);
        let phi = leray_project(&helmholtz(&u, alpha).unwrap());
        prop_assert!(sobolev_norm(&u, -4.0) < sobolev_norm(&phi, -4.0));
    }

    #[test]
    fn curl_form_and_advection_differ_by_the_remainder(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let g = grid(24, 2.0 * std::f64::consts::PI);
        let tr = SpectralTransform::new(&g);
        let u = random_solenoidal(&g, seed, 1.5, true);
        let gap = advection(&tr, &u).unwrap().sub(&leray_project(&curl_cross(&tr, &u, alpha).unwrap())).unwrap();
        let r = remainder(&tr, &u, alpha).unwrap();
        let scale = sobolev_norm(&advection(&tr, &u).unwrap(), 0.0) + alpha * sobolev_norm(&stokes_apply(&u).unwrap(), 1.0);
        prop_assert!(sobolev_norm(&gap.sub(&r).unwrap(), 0.0) <= 1e-11 * scale.max(1e-300));
    }

    #[test]
    fn nonlinear_terms_preserve_conjugate_symmetry(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let g = grid(16, 3.0);
        let tr = SpectralTransform::new(&g);
        let u = random_solenoidal(&g, seed, 1.0, true);
        let b = curl_cross(&tr, &u, alpha).unwrap();
        prop_assert!(b.conjugate_symmetry_error() <= 1e-14 * b.max_abs().max(1e-300));
    }
}
