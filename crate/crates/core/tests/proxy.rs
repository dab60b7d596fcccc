use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use grsreach::dynamics::Lipschitz;
use grsreach::proxy::{radial_closed_form, ProxyParams, RadiusVariant};
use grsreach::verify::{boundary_margin_ratio, collinearity_residual, radial_oracle_residual, scaling_residual};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

/// Drift small enough that the boundary stays off the domain edge at `T`.
fn proxies() -> impl Strategy<Value = (ProxyParams, f64)> {
    (
        1.0f64..50.0,
        0.5f64..3.0,
        0.0f64..0.3,
        0.0f64..std::f64::consts::TAU,
        0.05f64..0.5,
    )
        .prop_map(|(b, c, frac, ang, horizon)| {
            let a = v(&[ang.cos(), ang.sin()]) * (frac * b);
            (ProxyParams::from_constants(a, b, c).unwrap(), horizon)
        })
}

/// Weak drift and short horizons, so that `|a| <= (b - c|y|) / 2` on the boundary.
fn mild_proxies() -> impl Strategy<Value = (ProxyParams, f64)> {
    (
        1.0f64..50.0,
        0.5f64..3.0,
        0.0f64..0.1,
        0.0f64..std::f64::consts::TAU,
        0.05f64..0.7,
    )
        .prop_map(|(b, c, frac, ang, ct)| {
            let a = v(&[ang.cos(), ang.sin()]) * (frac * b);
            (ProxyParams::from_constants(a, b, c).unwrap(), ct / c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn drift_subtracted_paths_are_straight((p, t) in proxies()) {
        prop_assert!(collinearity_residual(&p, t, 72) <= 1e-8);
    }

    #[test]
    fn boundary_is_not_reached_early((p, t) in mild_proxies()) {
        prop_assert!(boundary_margin_ratio(&p, t, 36) >= 1.0);
    }

    #[test]
    fn drift_free_radius_matches_closed_form(b in 0.5f64..200.0, c in 0.1f64..5.0, t in 0.01f64..1.0) {
        prop_assert!(radial_oracle_residual(b, c, t, 36) <= 1e-8);
    }

    #[test]
    fn drift_free_scaling_law(b in 0.5f64..50.0, c in 0.1f64..3.0, t in 0.01f64..0.5) {
        let p = ProxyParams::from_constants(DVector::zeros(2), b, c).unwrap();
        prop_assert!(scaling_residual(&p, t, &[1.0, 2.0, 3.0], 24) <= 1e-7);
    }

    #[test]
    fn boundary_stays_inside_domain((p, t) in proxies()) {
        let boundary = p.grs_boundary(t, 36).unwrap();
        for pt in &boundary.points {
            prop_assert!((&pt.endpoint - &p.origin).norm() <= p.domain_radius() + 1e-9);
        }
    }

    #[test]
    fn learning_radius_grows_with_k((p, _t) in proxies(), k in 1.0f64..10.0) {
        let r1 = p.learning_radius_with(k, 1e-3, 2, RadiusVariant::Raw, 36);
        let r2 = p.learning_radius_with(2.0 * k, 1e-3, 2, RadiusVariant::Raw, 36);
        prop_assert!(r2 > r1);
    }

    #[test]
    fn unique_control_reproduces_boundary_point((p, t) in proxies(), ang in 0.0f64..std::f64::consts::TAU) {
        let u = v(&[ang.cos(), ang.sin()]);
        let end = p.flow(&u, t, None).endpoint().clone();
        let back = p.unique_boundary_control(&end, t).unwrap();
        prop_assert!((back - u).norm() <= 1e-9);
    }
}

#[test]
fn derived_constants_follow_pseudoinverse_norm() {
    let g = DMatrix::from_diagonal(&v(&[4.0, 0.25]));
    let p = ProxyParams::derive(&v(&[1.0, 2.0]), &g, Lipschitz::new(0.3, 0.7)).unwrap();
    assert!((p.gain - 0.25).abs() < 1e-12);
    assert!((p.decay - 1.0).abs() < 1e-12);
    assert_eq!(p.image_rank(), 2);
    assert!((p.domain_radius() - 0.25).abs() < 1e-12);
}

#[test]
fn radial_closed_form_limits() {
    assert_eq!(radial_closed_form(3.0, 2.0, 0.0), 0.0);
    assert!((radial_closed_form(3.0, 2.0, 50.0) - 1.5).abs() < 1e-12);
    let small = radial_closed_form(3.0, 2.0, 1e-8);
    assert!((small - 3e-8).abs() < 1e-14);
}

#[test]
fn learning_radius_variants_differ_by_drift() {
    let a = v(&[0.5, 0.0]);
    let p = ProxyParams::from_constants(a, 10.0, 1.0).unwrap();
    let flat = ProxyParams::from_constants(DVector::zeros(2), 10.0, 1.0).unwrap();
    let raw = p.learning_radius(2.0, 1e-3, 2, RadiusVariant::Raw);
    let sub = p.learning_radius(2.0, 1e-3, 2, RadiusVariant::DriftSubtracted);
    let span = 2.0 * 3.0 * 1e-3;
    assert!(raw > sub);
    assert!(raw - sub <= 0.5 * span + 1e-12, "{raw} {sub}");
    assert!(
        (flat.learning_radius(2.0, 1e-3, 2, RadiusVariant::Raw) - radial_closed_form(10.0, 1.0, span)).abs() < 1e-9
    );
}
