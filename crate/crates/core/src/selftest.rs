//! The special-function identity suite.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::format::ser_real;
use crate::modular::{
    jacobi_ratio_check, log_phi, log_phi2, log_phi_quadrature, theta1, ModularParams,
};
use crate::{c, Complex, Real, Result, I};

/// Default tolerance for identities evaluated from products.
pub const PRODUCT_SUITE_TOL: Real = 1e-9;
/// Default tolerance for identities involving contour quadrature.
pub const QUADRATURE_SUITE_TOL: Real = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Product,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub form: Form,
    #[serde(serialize_with = "ser_real")]
    pub theta: Real,
    pub points: usize,
    #[serde(serialize_with = "ser_real")]
    pub max_residual: Real,
    #[serde(serialize_with = "ser_real")]
    pub tol: Real,
    pub passed: bool,
}

const CHECKS: [(&str, Form); 8] = [
    ("phi_inversion", Form::Product),
    ("phi_shift", Form::Product),
    ("theta1_quasi_periodicity", Form::Product),
    ("jacobi", Form::Product),
    ("phi_inversion", Form::Quadrature),
    ("phi2_inversion", Form::Quadrature),
    ("phi2_shift", Form::Quadrature),
    ("phi_product_vs_quadrature", Form::Quadrature),
];

fn residuals_at(x: Real, p: &ModularParams) -> Result<[Real; 8]> {
    let z = c(x, 0.0);
    let eta = p.eta;
    let u = p.u(z);
    let us = p.ustar(z);

    let lp = log_phi(z, p)?;
    let lm = log_phi(-z, p)?;
    let inv = (lp + lm - I * PI * x * x - I * PI * p.c_b).norm();

    let shift_lhs = log_phi(c(x, -eta), p)? - log_phi(c(x, eta), p)?;
    let shift = (shift_lhs - (1.0 - u).ln() - (1.0 - us).ln()).norm();

    // Relative to the size of the two terms: |u| spans e^{±2πη·2}.
    let t0 = theta1(u, p)?;
    let t1 = u * theta1(p.q2() * u, p)?;
    let quasi = (t0 + t1).norm() / t0.norm().max(t1.norm()).max(Real::MIN_POSITIVE);

    let jac = jacobi_ratio_check(z, p)?;

    let qp = log_phi_quadrature(z, p)?;
    let qm = log_phi_quadrature(-z, p)?;
    let inv_q = (qp + qm - I * PI * x * x - I * PI * p.c_b).norm();

    let f2p = log_phi2(z, p)?;
    let f2m = log_phi2(-z, p)?;
    let inv2 = (f2p + f2m - I * PI * x * x / 2.0 - 2.0 * PI * I * p.c_b - I * PI / 4.0).norm();

    let sh2: Complex = log_phi2(c(x, eta), p)? + log_phi2(c(x, -eta), p)?;
    let shift2 = (sh2 - qp).norm();

    let rep = (qp - lp).norm();
    Ok([inv, shift, quasi, jac, inv_q, inv2, shift2, rep])
}

/// Runs every identity at each x. `tol` replaces both default
/// tolerances when given.
pub fn identity_suite(
    params: &ModularParams,
    xs: &[Real],
    tol: Option<Real>,
) -> Result<Vec<IdentityCheck>> {
    let rows = xs
        .par_iter()
        .map(|&x| residuals_at(x, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(CHECKS
        .iter()
        .enumerate()
        .map(|(k, &(name, form))| {
            let max_residual = rows.iter().map(|r| r[k]).fold(0.0, Real::max);
            let tol = tol.unwrap_or(match form {
                Form::Product => PRODUCT_SUITE_TOL,
                Form::Quadrature => QUADRATURE_SUITE_TOL,
            });
            IdentityCheck {
                name,
                form,
                theta: params.theta,
                points: xs.len(),
                max_residual,
                tol,
                passed: max_residual <= tol,
            }
        })
        .collect())
}

/// 20 deterministic points spread over [−2, 2], avoiding 0.
pub fn default_points() -> Vec<Real> {
    (0..20).map(|k| -1.93 + 0.203 * k as Real).collect()
}
