//! Modular parameters, q-series building blocks and the quantum
//! dilogarithms φ and φ₂.
//!
//! Every function here is a pure function of an immutable
//! [`ModularParams`] bundle.

use std::f64::consts::PI;

use serde::Serialize;

use crate::quad::{integrate_breaks, QuadOptions};
use crate::{c, wrap_angle, Complex, Error, Real, Result, I};

/// Largest nome modulus accepted before series stop being trustworthy in
/// double precision.
pub const MAX_NOME: Real = 0.999;

/// Tail tolerance for infinite products.
pub const PRODUCT_TOL: Real = 1e-17;

const MAX_PRODUCT_TERMS: usize = 1_000_000;

/// The arena every function lives in: b = e^{iθ}, q = e^{iπb²},
/// q* = e^{−iπb⁻²} and the derived reals η, σ, c_b.
///
/// `star()` applies the involution b → b⁻¹, q ↔ q*. A starred bundle
/// describes the dual copy of every object; its `b` field is b⁻¹ and its
/// `q` field is q*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularParams {
    pub theta: Real,
    pub b: Complex,
    pub q: Complex,
    pub qstar: Complex,
    /// log q, kept exact so products never need a complex logarithm of q.
    pub log_q: Complex,
    pub log_qstar: Complex,
    pub eta: Real,
    pub sigma: Real,
    pub c_b: Real,
    pub dual: bool,
}

impl ModularParams {
    pub fn new(theta: Real) -> Result<Self> {
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(Error::Domain(format!(
                "theta = {theta} outside the open interval (0, pi/2)"
            )));
        }
        let b = Complex::from_polar(1.0, theta);
        let log_q = I * PI * b * b;
        let log_qstar = -I * PI / (b * b);
        let q = log_q.exp();
        if q.norm() > MAX_NOME {
            return Err(Error::Precision(format!(
                "|q| = {} exceeds {MAX_NOME}",
                q.norm()
            )));
        }
        Ok(Self {
            theta,
            b,
            q,
            qstar: log_qstar.exp(),
            log_q,
            log_qstar,
            eta: theta.cos(),
            sigma: theta.sin(),
            c_b: (2.0 * theta).cos() / 6.0,
            dual: false,
        })
    }

    /// The star involution. Exact: applying it twice returns `self`.
    pub fn star(&self) -> Self {
        Self {
            b: self.b.conj(),
            q: self.qstar,
            qstar: self.q,
            log_q: self.log_qstar,
            log_qstar: self.log_q,
            dual: !self.dual,
            ..*self
        }
    }

    pub fn q2(&self) -> Complex {
        self.q * self.q
    }

    /// u = e^{2πbx} in this frame (u* in the starred frame).
    pub fn u(&self, x: Complex) -> Complex {
        (2.0 * PI * self.b * x).exp()
    }

    /// The dual coordinate u* = e^{2πb⁻¹x}, or u in the starred frame.
    pub fn ustar(&self, x: Complex) -> Complex {
        (2.0 * PI * x / self.b).exp()
    }

    /// q^{power} evaluated through the exact logarithm.
    pub fn q_pow(&self, power: Real) -> Complex {
        (self.log_q * power).exp()
    }
}

/// A spectral point with both exponential coordinates precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub x: Complex,
    pub u: Complex,
    pub ustar: Complex,
}

impl EvalPoint {
    pub fn new(x: Complex, params: &ModularParams) -> Self {
        Self {
            x,
            u: params.u(x),
            ustar: params.ustar(x),
        }
    }
}

/// Number of factors in a q-Pochhammer symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    Finite(usize),
    Infinite,
}

/// (z; nome)_n = ∏_{k<n} (1 − z·nome^k). The nome is consumed as given, so
/// the usual (z; q²) symbol takes `nome = q²`.
pub fn qpoch(z: Complex, nome: Complex, n: Count) -> Result<Complex> {
    match n {
        Count::Finite(n) => {
            let mut p = c(1.0, 0.0);
            let mut w = z;
            for _ in 0..n {
                p *= 1.0 - w;
                w *= nome;
            }
            Ok(p)
        }
        Count::Infinite => {
            let r = nome.norm();
            if r >= 1.0 {
                return Err(Error::Convergence(format!(
                    "infinite q-Pochhammer with |nome| = {r} >= 1"
                )));
            }
            let mut p = c(1.0, 0.0);
            let mut w = z;
            for _ in 0..MAX_PRODUCT_TERMS {
                if w.norm() / (1.0 - r) < PRODUCT_TOL {
                    return Ok(p);
                }
                p *= 1.0 - w;
                w *= nome;
            }
            Err(Error::Convergence("q-Pochhammer tail did not decay".into()))
        }
    }
}

/// Termwise principal-branch log of (z; nome)_∞.
pub fn log_qpoch(z: Complex, nome: Complex) -> Result<Complex> {
    let r = nome.norm();
    if r >= 1.0 {
        return Err(Error::Convergence(format!(
            "infinite q-Pochhammer with |nome| = {r} >= 1"
        )));
    }
    let mut s = c(0.0, 0.0);
    let mut w = z;
    for _ in 0..MAX_PRODUCT_TERMS {
        if w.norm() / (1.0 - r) < PRODUCT_TOL {
            return Ok(s);
        }
        s += (1.0 - w).ln();
        w *= nome;
    }
    Err(Error::Convergence("q-Pochhammer tail did not decay".into()))
}

/// Shortened theta function θ₁(u) = (u; q²)_∞ (q²u⁻¹; q²)_∞.
pub fn theta1(u: Complex, params: &ModularParams) -> Result<Complex> {
    if u == c(0.0, 0.0) {
        return Err(Error::Domain("theta1 is undefined at u = 0".into()));
    }
    let q2 = params.q2();
    Ok(qpoch(u, q2, Count::Infinite)? * qpoch(q2 / u, q2, Count::Infinite)?)
}

/// |θ₁(u)/θ₁(u)* − e^{iπ(x+σ)² + iπc_b}|, the starred theta built from
/// (u*, q*²).
pub fn jacobi_ratio_check(x: Complex, params: &ModularParams) -> Result<Real> {
    let p = EvalPoint::new(x, params);
    let num = theta1(p.u, params)?;
    let den = theta1(p.ustar, &params.star())?;
    if num.norm() < 1e-300 || den.norm() < 1e-300 {
        return Err(Error::Domain(format!("theta1 vanishes at x = {x}")));
    }
    let rhs = (I * PI * (x + params.sigma).powi(2) + I * PI * params.c_b).exp();
    Ok((num / den - rhs).norm())
}

/// Which side of a zero lying exactly on the continuation line the path
/// passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Above,
    Below,
}

/// Continuous log(1 − e^{κ+λs}) along real s, continued from s = −∞
/// (needs Re λ > 0). Zeros met exactly on the line are passed on `side`.
pub(crate) fn log_one_minus_exp(kappa: Complex, lambda: Complex, s: Real, side: Side) -> Complex {
    let v = (kappa + lambda * s).exp();
    if v.norm() <= 1.0 {
        return (1.0 - v).ln();
    }
    let s_cross = -kappa.re / lambda.re;
    let mut phase = wrap_angle(kappa.im + lambda.im * s_cross + PI);
    if (phase.abs() - PI).abs() < 1e-9 {
        phase = match side {
            Side::Above => -PI,
            Side::Below => PI,
        };
    }
    lambda * (s - s_cross) + I * phase + (1.0 - 1.0 / v).ln()
}

fn side_for(x: Complex) -> Side {
    if x.im > 0.0 {
        Side::Below
    } else {
        Side::Above
    }
}

/// Iterates the two factor families of φ:
/// numerator 1 + q^{2n+1}u and starred 1 + q*^{2n+1}u*, each written as
/// 1 − e^{κ + λ Re x}.
fn phi_factors(
    x: Complex,
    params: &ModularParams,
    mut visit: impl FnMut(Complex, Complex, Complex, Complex) -> Result<()>,
) -> Result<()> {
    let lam = 2.0 * PI * params.b;
    let lam_star = 2.0 * PI / params.b;
    let base = I * PI + lam * I * x.im;
    let base_star = I * PI + lam_star * I * x.im;
    for n in 0..MAX_PRODUCT_TERMS {
        let k = (2 * n + 1) as Real;
        let kappa = base + params.log_q * k;
        let kappa_star = base_star + params.log_qstar * k;
        let mag = (kappa.re + lam.re * x.re).exp();
        let mag_star = (kappa_star.re + lam_star.re * x.re).exp();
        if mag < 1e-18 && mag_star < 1e-18 {
            return Ok(());
        }
        visit(kappa, lam, kappa_star, lam_star)?;
    }
    Err(Error::Convergence("phi product did not converge".into()))
}

fn check_factor(kappa: Complex, lam: Complex, x: Complex) -> Result<()> {
    let v = (kappa + lam * x.re).exp();
    if (1.0 - v).norm() < 1e-14 {
        return Err(Error::Singularity(format!("{x}")));
    }
    Ok(())
}

/// log φ(x) from the product (−qu; q²)_∞ / (−q*u*; q*²)_∞.
///
/// Terms are logged individually. For |Im x| ≤ η each term is continued
/// along the horizontal line through x from Re x = −∞, where φ → 1; this
/// is the analytic branch of log φ on the closed strip, approached from
/// inside at the boundary lines. Outside the strip the termwise principal
/// branch is returned.
pub fn log_phi(x: Complex, params: &ModularParams) -> Result<Complex> {
    if x.im.abs() > params.eta * (1.0 + 1e-12) {
        return log_phi_principal(x, params);
    }
    let side = side_for(x);
    let mut sum = c(0.0, 0.0);
    phi_factors(x, params, |k, l, ks, ls| {
        check_factor(k, l, x)?;
        check_factor(ks, ls, x)?;
        sum += log_one_minus_exp(k, l, x.re, side) - log_one_minus_exp(ks, ls, x.re, side);
        Ok(())
    })?;
    Ok(sum)
}

/// Termwise principal-branch log of the φ product. Correct modulo 2πi.
pub fn log_phi_principal(x: Complex, params: &ModularParams) -> Result<Complex> {
    let mut sum = c(0.0, 0.0);
    phi_factors(x, params, |k, l, ks, ls| {
        check_factor(k, l, x)?;
        check_factor(ks, ls, x)?;
        let v = (k + l * x.re).exp();
        let vs = (ks + ls * x.re).exp();
        sum += (1.0 - v).ln() - (1.0 - vs).ln();
        Ok(())
    })?;
    Ok(sum)
}

/// φ(x) itself; branch-free.
pub fn phi(x: Complex, params: &ModularParams) -> Result<Complex> {
    Ok(log_phi_principal(x, params)?.exp())
}

#[derive(Clone, Copy)]
enum Dilog {
    Phi,
    Phi2,
}

/// Radius of the semicircular detour above y = 0: below half the distance
/// to the nearest pole of 1/sinh(by), 1/sinh(y/b) (distance π) and
/// 1/cosh(2ηy) (distance π/4η).
pub fn detour_radius(params: &ModularParams) -> Real {
    (PI / (8.0 * params.eta)).min(PI / 2.0)
}

fn contour_integral(x: Complex, params: &ModularParams, kind: Dilog) -> Result<Complex> {
    let b = params.b;
    let eta = params.eta;
    let (decay, label) = match kind {
        Dilog::Phi => (2.0 * eta - 2.0 * x.im.abs(), "log phi"),
        Dilog::Phi2 => (4.0 * eta - 2.0 * x.im.abs(), "log phi2"),
    };
    if decay <= 1e-3 * eta {
        return Err(Error::Domain(format!(
            "{label} integral does not converge at Im x = {}",
            x.im
        )));
    }
    let r = detour_radius(params);
    let binv = 1.0 / b;
    let sum_bb = b + binv;

    // y > 0 half-line with the y → −y mirror folded in, written with
    // decaying exponentials only.
    let folded = |y: Real| -> Complex {
        let num = ((-2.0 * I * x - sum_bb) * y).exp() - ((2.0 * I * x - sum_bb) * y).exp();
        let den = (1.0 - (-2.0 * b * y).exp()) * (1.0 - (-2.0 * binv * y).exp()) * y;
        let val = num / den;
        match kind {
            Dilog::Phi => val,
            Dilog::Phi2 => val * (-2.0 * eta * y).exp() / (1.0 + (-4.0 * eta * y).exp()),
        }
    };
    let direct = |y: Complex| -> Complex {
        let v = (-2.0 * I * x * y).exp() / (4.0 * (b * y).sinh() * (binv * y).sinh() * y);
        match kind {
            Dilog::Phi => v,
            Dilog::Phi2 => v / (2.0 * (2.0 * eta * y).cosh()),
        }
    };

    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    };
    let y_max = r + 1.0 + 40.0 / decay;
    let panels = (y_max - r).ceil() as usize;
    let breaks: Vec<Real> = (0..=panels)
        .map(|k| r + (y_max - r) * k as Real / panels as Real)
        .collect();
    let line = integrate_breaks(folded, &breaks, opts)?;
    // Upper semicircle traversed from −r (angle π) to r (angle 0).
    let arc = integrate_breaks(
        |phi: Real| {
            let y = Complex::from_polar(r, phi);
            direct(y) * I * y
        },
        &[0.0, PI / 2.0, PI],
        opts,
    )?;
    Ok(line.value - arc.value)
}

/// log φ(x) from the contour integral
/// ∫_{ℝ+i0} e^{−2ixy} / (4 sinh(by) sinh(b⁻¹y)) dy/y.
///
/// The integral converges for |Im x| < η. It is single valued there and
/// agrees with the branch of [`log_phi`].
pub fn log_phi_quadrature(x: Complex, params: &ModularParams) -> Result<Complex> {
    contour_integral(x, params, Dilog::Phi)
}

/// log φ₂(x) = ∫_{ℝ+i0} e^{−2ixy} / (8 cosh(2ηy) sinh(by) sinh(b⁻¹y)) dy/y,
/// convergent for |Im x| < 2η.
pub fn log_phi2(x: Complex, params: &ModularParams) -> Result<Complex> {
    contour_integral(x, params, Dilog::Phi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(theta: Real) -> ModularParams {
        ModularParams::new(theta).unwrap()
    }

    #[test]
    fn self_dual_point() {
        let m = p(PI / 4.0);
        assert!((m.q - m.qstar).norm() < 1e-15);
        assert!((m.q.re - (-PI).exp()).abs() < 1e-15);
        assert!((m.eta - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((m.sigma - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(m.c_b.abs() < 1e-15);
    }

    #[test]
    fn pi_over_six() {
        let m = p(PI / 6.0);
        assert!((m.c_b - 1.0 / 12.0).abs() < 1e-15);
        assert!((m.eta - (PI / 6.0).cos()).abs() < 1e-15);
        assert!((m.sigma - 0.5).abs() < 1e-15);
        assert!((m.eta * m.eta + m.sigma * m.sigma - 1.0).abs() < 1e-15);
        let expected = (-PI * (2.0 * m.theta).sin()).exp();
        assert!((m.q.norm() - expected).abs() < 1e-15);
        assert!((m.qstar.norm() - expected).abs() < 1e-15);
    }

    #[test]
    fn theta_range_is_enforced() {
        assert!(matches!(ModularParams::new(0.0), Err(Error::Domain(_))));
        assert!(matches!(
            ModularParams::new(PI / 2.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(ModularParams::new(-0.1), Err(Error::Domain(_))));
        assert!(matches!(ModularParams::new(1e-4), Err(Error::Precision(_))));
    }

    #[test]
    fn star_is_an_exact_involution() {
        for th in [0.3, PI / 4.0, 1.2] {
            let m = p(th);
            assert_eq!(m.star().star(), m);
            assert!((m.star().b * m.b - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn shift_identities_of_exponential_coordinates() {
        let m = p(0.7);
        let x = c(0.31, 0.05);
        let shifted = EvalPoint::new(x + I * m.b, &m);
        let base = EvalPoint::new(x, &m);
        assert!((shifted.u - m.q2() * base.u).norm() < 1e-13 * base.u.norm());
        let s2 = EvalPoint::new(x + I / m.b, &m);
        let factor = (2.0 * PI * I / (m.b * m.b)).exp();
        assert!((s2.ustar - factor * base.ustar).norm() < 1e-12 * s2.ustar.norm());
        let real = EvalPoint::new(c(0.4, 0.0), &m);
        assert!((real.ustar - real.u.conj()).norm() < 1e-14 * real.u.norm());
    }

    #[test]
    fn qpoch_trivia() {
        let m = p(PI / 4.0);
        let q2 = m.q2();
        assert_eq!(
            qpoch(c(0.0, 0.0), q2, Count::Infinite).unwrap(),
            c(1.0, 0.0)
        );
        let z = c(0.3, -0.2);
        assert_eq!(qpoch(z, q2, Count::Finite(1)).unwrap(), 1.0 - z);
        assert!(matches!(
            qpoch(z, c(1.0, 0.0), Count::Infinite),
            Err(Error::Convergence(_))
        ));
    }

    #[test]
    fn qpoch_against_brute_product() {
        let m = p(PI / 4.0);
        let q2 = m.q2();
        let mut brute = c(1.0, 0.0);
        let mut w = q2;
        while w.norm() >= 1e-16 {
            brute *= 1.0 - w;
            w *= q2;
        }
        let v = qpoch(q2, q2, Count::Infinite).unwrap();
        assert!((v - brute).norm() < 1e-15);
        // frozen: (q²; q²)_∞ at θ = π/4, q² = e^{-2π}
        assert!((v.re - 0.998_129_069_925_958).abs() < 1e-12, "{v}");
    }

    #[test]
    fn theta1_zero_and_quasi_periodicity() {
        let m = p(1.0);
        assert!(theta1(c(1.0, 0.0), &m).unwrap().norm() < 1e-15);
        assert!(matches!(theta1(c(0.0, 0.0), &m), Err(Error::Domain(_))));
        let u = c(0.4, 0.7);
        let lhs = theta1(u, &m).unwrap();
        let rhs = -u * theta1(m.q2() * u, &m).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn theta1_at_minus_one() {
        let m = p(PI / 4.0);
        let q2 = m.q2();
        let mut brute = c(1.0, 0.0);
        for k in 0..40 {
            let qk = q2.powu(k);
            brute *= (1.0 + qk) * (1.0 + q2 * qk);
        }
        let v = theta1(c(-1.0, 0.0), &m).unwrap();
        assert!((v - brute).norm() < 1e-14);
    }

    #[test]
    fn jacobi_identity() {
        for th in [PI / 4.0, PI / 3.0] {
            let r = jacobi_ratio_check(c(0.3, 0.0), &p(th)).unwrap();
            assert!(r < 1e-10, "theta {th}: {r}");
        }
        let m = p(PI / 4.0);
        let r = jacobi_ratio_check(c(0.3, 0.0) + I * m.b, &m).unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn phi_inversion_and_value_at_origin() {
        let m = p(PI / 4.0);
        for x in [0.2, 0.7] {
            let s = log_phi(c(x, 0.0), &m).unwrap() + log_phi(c(-x, 0.0), &m).unwrap();
            let rhs = I * PI * x * x + I * PI * m.c_b;
            assert!((s - rhs).norm() < 1e-10);
        }
        assert!((log_phi(c(0.0, 0.0), &m).unwrap()).norm() < 1e-14);
        let m3 = p(PI / 3.0);
        let v = log_phi(c(0.0, 0.0), &m3).unwrap();
        assert!((v - I * PI * m3.c_b / 2.0).norm() < 1e-14);
    }

    #[test]
    fn phi_shift_relation() {
        let m = p(0.5);
        for x in [0.15, 0.9, -1.4] {
            let lhs = log_phi(c(x, -m.eta), &m).unwrap() - log_phi(c(x, m.eta), &m).unwrap();
            let pt = EvalPoint::new(c(x, 0.0), &m);
            let rhs = (1.0 - pt.u).ln() + (1.0 - pt.ustar).ln();
            // (1 − u)(1 − u*) = |1 − u|² > 0 for real x
            assert!(rhs.im.abs() < 1e-12);
            assert!((lhs - rhs).norm() < 1e-10, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn product_singularity_is_reported() {
        let m = p(PI / 4.0);
        // 1 + qu vanishes at x = σ on the real axis.
        let r = log_phi(c(m.sigma, 0.0), &m);
        assert!(matches!(r, Err(Error::Singularity(_))));
    }

    #[test]
    fn quadrature_matches_product() {
        let m = p(PI / 3.0);
        let a = log_phi_quadrature(c(0.5, 0.0), &m).unwrap();
        let b = log_phi(c(0.5, 0.0), &m).unwrap();
        assert!((a - b).norm() < 1e-7);
        let z = log_phi_quadrature(c(0.0, 0.0), &p(PI / 4.0)).unwrap();
        assert!(z.norm() < 1e-8);
        let u = log_phi_quadrature(c(1.3, 0.0), &m).unwrap();
        assert!(u.re.abs() < 1e-8);
    }

    #[test]
    fn quadrature_domain() {
        let m = p(PI / 4.0);
        assert!(matches!(
            log_phi_quadrature(c(0.0, m.eta), &m),
            Err(Error::Domain(_))
        ));
        assert!(log_phi2(c(0.0, m.eta), &m).is_ok());
    }

    #[test]
    fn phi2_identities() {
        let m = p(PI / 4.0);
        let x = 0.4;
        let s = log_phi2(c(x, 0.0), &m).unwrap() + log_phi2(c(-x, 0.0), &m).unwrap();
        let rhs = I * PI * x * x / 2.0 + 2.0 * PI * I * m.c_b + I * PI / 4.0;
        assert!((s - rhs).norm() < 1e-7);
        let z = log_phi2(c(0.0, 0.0), &m).unwrap();
        assert!((z - I * PI / 8.0).norm() < 1e-9);
        let sh = log_phi2(c(0.3, m.eta), &m).unwrap() + log_phi2(c(0.3, -m.eta), &m).unwrap();
        assert!((sh - log_phi(c(0.3, 0.0), &m).unwrap()).norm() < 1e-7);
    }
}
