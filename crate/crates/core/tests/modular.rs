use std::f64::consts::PI;

use modsg_core::modular::{
    jacobi_ratio_check, log_phi, log_phi2, log_phi_quadrature, phi, qpoch, theta1, Count,
    ModularParams,
};
use modsg_core::selftest::{default_points, identity_suite};
use modsg_core::{Complex, Error, Real};
use proptest::prelude::*;

fn c(re: Real, im: Real) -> Complex {
    Complex::new(re, im)
}

#[test]
fn self_dual_point_has_equal_nomes() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    assert!((p.q - p.qstar).norm() <= 1e-15);
    assert_eq!(p.star().star(), p);
}

#[test]
fn theta_outside_range_is_rejected() {
    for theta in [0.0, PI / 2.0, -0.3, 2.0, Real::NAN] {
        assert!(ModularParams::new(theta).is_err(), "{theta}");
    }
}

#[test]
fn finite_pochhammer_matches_direct_product() {
    let z = c(0.3, -0.2);
    let nome = c(0.1, 0.2);
    let direct: Complex = (0..5).map(|k| 1.0 - z * nome.powu(k)).product();
    let v = qpoch(z, nome, Count::Finite(5)).unwrap();
    assert!((v - direct).norm() < 1e-15);
}

#[test]
fn phi_tends_to_one_on_the_left() {
    let p = ModularParams::new(PI / 3.0).unwrap();
    let v = phi(c(-12.0, 0.0), &p).unwrap();
    assert!((v - 1.0).norm() < 1e-12);
}

#[test]
fn phi_is_unimodular_on_the_real_line_at_self_dual_point() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    for x in [-1.4, -0.3, 0.2, 1.1] {
        assert!((phi(c(x, 0.0), &p).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn phi_zero_at_c_b_is_reported() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let r = log_phi(c(0.0, p.eta), &p);
    assert!(matches!(r, Err(Error::Singularity(_))), "{r:?}");
}

#[test]
fn quadrature_refuses_outside_its_strip() {
    let p = ModularParams::new(0.5).unwrap();
    assert!(log_phi_quadrature(c(0.1, 1.01 * p.eta), &p).is_err());
    assert!(log_phi2(c(0.1, 1.5 * p.eta), &p).is_ok());
}

#[test]
fn suite_passes_on_default_points() {
    for theta in [PI / 4.0, PI / 3.0, 0.5] {
        let p = ModularParams::new(theta).unwrap();
        for chk in identity_suite(&p, &default_points(), None).unwrap() {
            assert!(chk.passed, "{chk:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phi_inversion(theta in 0.3f64..1.3, x in -2.0f64..2.0) {
        let p = ModularParams::new(theta).unwrap();
        let s = log_phi(c(x, 0.0), &p).unwrap() + log_phi(c(-x, 0.0), &p).unwrap();
        let want = Complex::i() * PI * (x * x + p.c_b);
        prop_assert!((s - want).norm() < 1e-9);
    }

    #[test]
    fn theta1_quasi_periodicity(theta in 0.3f64..1.3, x in -1.5f64..1.5, y in -0.3f64..0.3) {
        let p = ModularParams::new(theta).unwrap();
        let u = p.u(c(x, y));
        let t0 = theta1(u, &p).unwrap();
        let t1 = u * theta1(p.q2() * u, &p).unwrap();
        prop_assert!((t0 + t1).norm() <= 1e-9 * t0.norm().max(t1.norm()));
    }

    #[test]
    fn jacobi_identity(theta in 0.3f64..1.3, x in -2.0f64..2.0) {
        let p = ModularParams::new(theta).unwrap();
        prop_assert!(jacobi_ratio_check(c(x, 0.0), &p).unwrap() < 1e-9);
    }

    #[test]
    fn star_frame_conjugates_real_points(theta in 0.3f64..1.3, x in -2.0f64..2.0) {
        let p = ModularParams::new(theta).unwrap();
        let us = p.ustar(c(x, 0.0));
        let u_dual = p.star().u(c(x, 0.0));
        prop_assert!((us - u_dual).norm() < 1e-12 * us.norm());
    }
}
