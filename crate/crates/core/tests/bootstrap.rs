use std::f64::consts::PI;

use modsg_core::bootstrap::{toy, BootstrapState};
use modsg_core::model::{ModelSpec, XiMode};
use modsg_core::modular::ModularParams;
use modsg_core::{Complex, Error, Real};
use proptest::prelude::*;

fn chain(t2: Real, p: &ModularParams) -> ModelSpec {
    ModelSpec::new(
        vec![0.15, 0.05],
        vec![-0.05, -0.15],
        ModelSpec::tau_for_t2(t2, p),
        XiMode::Free,
    )
    .unwrap()
}

fn probes(p: &ModularParams) -> Vec<Complex> {
    let r0 = p.q.norm().sqrt();
    (0..6)
        .map(|k| Complex::from_polar(r0 * (1.0 + 0.1 * k as Real), 0.9 * k as Real))
        .collect()
}

#[test]
fn single_site_oracle_across_theta_and_order() {
    for theta in [PI / 4.0, PI / 3.0, 0.5] {
        let p = ModularParams::new(theta).unwrap();
        let spec =
            ModelSpec::homogeneous(1, 0.1, ModelSpec::tau_for_t2(1e-2, &p), XiMode::Free).unwrap();
        for order in [4, 6] {
            let r = toy::oracle_report(&spec, order, &p, None).unwrap();
            assert!(r.passed, "theta {theta} order {order}: {r:?}");
            assert_eq!(r.coefficients.len(), order + 1);
        }
    }
}

#[test]
fn oracle_needs_one_site() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let r = toy::oracle_report(&chain(1e-2, &p), 2, &p, None);
    assert!(matches!(r, Err(Error::Validation(_))));
}

#[test]
fn both_difference_equations_hold() {
    let p = ModularParams::new(PI / 3.0).unwrap();
    let s = BootstrapState::run(&chain(1e-2, &p), &[0.3, -0.3], 5, &p, false).unwrap();
    for u in probes(&p) {
        let scale = s.chi_plus(u).unwrap().norm().max(1.0);
        assert!(s.chi_plus_residual(u).unwrap().norm() < 1e-10 * scale);
        let scale = s.chi_minus(u).unwrap().norm().max(1.0);
        assert!(s.chi_minus_residual(u).unwrap().norm() < 1e-10 * scale);
    }
}

#[test]
fn dual_frame_transfer_agrees_with_mirror() {
    let p = ModularParams::new(0.5).unwrap();
    for dual in [false, true] {
        let s = BootstrapState::run(&chain(1e-2, &p), &[0.2, -0.2], 4, &p, dual).unwrap();
        let a = s.transfer_poly();
        let b = s.transfer_poly_from_mirror();
        for k in 0..=2 {
            assert!(
                (a.coeff(k) - b.coeff(k)).norm() < 1e-10,
                "dual {dual} k {k}"
            );
        }
    }
}

#[test]
fn wronskian_zeros_sit_on_the_roots() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let s = BootstrapState::run(&chain(1e-2, &p), &[0.4, -0.4], 4, &p, false).unwrap();
    let d = s.w_root_drift().unwrap();
    assert_eq!(d.count, 2);
    assert!(d.drifts.iter().all(|x| *x < 1e-12), "{d:?}");
}

#[test]
fn zero_families_follow_leading_correction() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let s = BootstrapState::run(&chain(1e-3, &p), &[0.27, -0.27], 4, &p, false).unwrap();
    let z = s.zero_asymptotics(1).unwrap();
    assert_eq!(z.entries.len(), 2);
    for e in &z.entries {
        assert!(e.rel_err_plus < 1e-2 && e.rel_err_minus < 1e-2, "{e:?}");
    }
}

#[test]
fn single_site_delta_prime_matches_closed_form() {
    let p = ModularParams::new(PI / 3.0).unwrap();
    let spec =
        ModelSpec::homogeneous(1, 0.2, ModelSpec::tau_for_t2(1e-3, &p), XiMode::Free).unwrap();
    let s = BootstrapState::run(&spec, &[0.0], 3, &p, false).unwrap();
    let a = spec.a(&p);
    let want = toy::delta_prime_11(a, 1.0 / a, &p);
    assert!((s.delta_prime(0, 1) - want).norm() < 1e-10);
}

#[test]
fn uncentred_roots_are_rejected() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let r = BootstrapState::run(&chain(1e-2, &p), &[0.3, -0.1], 2, &p, false);
    assert!(matches!(r, Err(Error::Validation(_))));
    let r = BootstrapState::run(&chain(1e-2, &p), &[0.3], 2, &p, false);
    assert!(matches!(r, Err(Error::Validation(_))));
}

#[test]
fn state_serializes() {
    let p = ModularParams::new(PI / 4.0).unwrap();
    let s = BootstrapState::run(&chain(1e-2, &p), &[0.3, -0.3], 2, &p, false).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
    assert_eq!(v["order"], 2);
    assert_eq!(v["roots"].as_array().unwrap().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wshift_residual_within_truncation_bound(r in 0.05f64..0.7, order in 1usize..5) {
        let p = ModularParams::new(PI / 4.0).unwrap();
        let t2: Real = 1e-2;
        let s = BootstrapState::run(&chain(t2, &p), &[r, -r], order, &p, false).unwrap();
        let bound = t2.powi(order as i32 + 1);
        for u in probes(&p) {
            prop_assert!(s.wshift_residual(u).unwrap().norm() <= bound);
        }
    }

    #[test]
    fn wronskian_tends_to_theta_product(r in 0.05f64..0.7) {
        let p = ModularParams::new(PI / 4.0).unwrap();
        let s = BootstrapState::run(&chain(1e-6, &p), &[r, -r], 2, &p, false).unwrap();
        for u in probes(&p) {
            let w = s.wronskian(u).unwrap();
            let th = s.theta_product(u).unwrap();
            let rho = w / th;
            prop_assert!((rho - 1.0).norm() < 1e-3, "{rho}");
        }
    }
}
