//! Dense complex polynomials and q-shifted products.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::modular::{Count, ModularParams, PRODUCT_TOL};
use crate::{c, Complex, Error, Real, Result};

/// A polynomial c₀ + c₁v + … + c_d v^d with v = u, or v = 1/u when
/// `reciprocal` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPoly {
    coeffs: Vec<Complex>,
    pub reciprocal: bool,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<Complex>) -> Self {
        while coeffs.last().is_some_and(|z| *z == c(0.0, 0.0)) {
            coeffs.pop();
        }
        Self {
            coeffs,
            reciprocal: false,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    pub fn one() -> Self {
        Self::constant(c(1.0, 0.0))
    }

    pub fn constant(z: Complex) -> Self {
        Self::new(vec![z])
    }

    /// Same coefficients, read in the variable 1/u.
    pub fn in_reciprocal(mut self) -> Self {
        self.reciprocal = true;
        self
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    /// Coefficient of v^n; zero beyond the degree.
    pub fn coeff(&self, n: usize) -> Complex {
        self.coeffs.get(n).copied().unwrap_or(c(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// ∏(1 − u/u_ν), constant term exactly one.
    pub fn from_roots(roots: &[Complex]) -> Result<Self> {
        let mut p = Self::one();
        for (i, r) in roots.iter().enumerate() {
            if r.norm() == 0.0 {
                return Err(Error::Domain(format!("root {i} is zero")));
            }
            p = &p * &Self::new(vec![c(1.0, 0.0), -1.0 / r]);
        }
        Ok(p)
    }

    /// ∏(1 + s_ν u) for the given slopes.
    pub fn from_linear_factors(slopes: &[Complex]) -> Self {
        slopes
            .iter()
            .fold(Self::one(), |p, s| &p * &Self::new(vec![c(1.0, 0.0), *s]))
    }

    /// p(v) at the stored variable v (u, or 1/u for reciprocal polynomials
    /// evaluated through [`CPoly::eval`]).
    pub fn eval_var(&self, v: Complex) -> Complex {
        self.coeffs
            .iter()
            .rev()
            .fold(c(0.0, 0.0), |acc, z| acc * v + z)
    }

    /// Value at u, honouring the reciprocal flag.
    pub fn eval(&self, u: Complex) -> Complex {
        if self.reciprocal {
            self.eval_var(1.0 / u)
        } else {
            self.eval_var(u)
        }
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, z)| z * n as Real)
            .collect();
        Self {
            reciprocal: self.reciprocal,
            ..Self::new(coeffs)
        }
    }

    /// Realises v → λv: coefficient cₙ becomes λⁿcₙ.
    pub fn q_scale(&self, lambda: Complex) -> Self {
        let mut pow = c(1.0, 0.0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|z| {
                let v = z * pow;
                pow *= lambda;
                v
            })
            .collect();
        Self {
            reciprocal: self.reciprocal,
            ..Self::new(coeffs)
        }
    }

    pub fn scale(&self, z: Complex) -> Self {
        Self {
            reciprocal: self.reciprocal,
            ..Self::new(self.coeffs.iter().map(|a| a * z).collect())
        }
    }

    /// Multiplication by v^k.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![c(0.0, 0.0); k];
        coeffs.extend_from_slice(&self.coeffs);
        Self {
            reciprocal: self.reciprocal,
            ..Self::new(coeffs)
        }
    }

    /// Roots in the stored variable, ordered by modulus then argument.
    ///
    /// Companion-matrix eigenvalues followed by Newton polishing on the
    /// original coefficients.
    pub fn roots(&self) -> Result<Vec<Complex>> {
        let d = self.degree();
        if self.is_zero() {
            return Err(Error::Domain("roots of the zero polynomial".into()));
        }
        if d == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[d];
        let mut m = DMatrix::<Complex>::zeros(d, d);
        for i in 1..d {
            m[(i, i - 1)] = c(1.0, 0.0);
        }
        for i in 0..d {
            m[(i, d - 1)] = -self.coeffs[i] / lead;
        }
        let eig = m
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::Convergence("companion eigenvalues".into()))?;
        let dp = self.derivative();
        let mut roots: Vec<Complex> = eig
            .iter()
            .map(|&z0| {
                let mut z = z0;
                for _ in 0..3 {
                    let d = dp.eval_var(z);
                    if d.norm() == 0.0 {
                        break;
                    }
                    let step = self.eval_var(z) / d;
                    if !step.re.is_finite() || !step.im.is_finite() {
                        break;
                    }
                    z -= step;
                }
                z
            })
            .collect();
        sort_by_modulus_then_arg(&mut roots);
        Ok(roots)
    }
}

/// Argument in (−π, π], with points within rounding of the real axis
/// snapped onto it.
fn stable_arg(z: Complex) -> Real {
    if z.im.abs() <= 1e-12 * z.norm() {
        if z.re < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        z.arg()
    }
}

/// Deterministic ordering: by modulus, ties (within 1e−12 relative) by
/// argument.
pub fn sort_by_modulus_then_arg(v: &mut [Complex]) {
    v.sort_by(|a, b| {
        let (ra, rb) = (a.norm(), b.norm());
        if (ra - rb).abs() <= 1e-12 * ra.max(rb) {
            stable_arg(*a).total_cmp(&stable_arg(*b))
        } else {
            ra.total_cmp(&rb)
        }
    });
}

fn check_same_variable(a: &CPoly, b: &CPoly) {
    assert_eq!(
        a.reciprocal, b.reciprocal,
        "mixing polynomials in u and in 1/u"
    );
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, rhs: &CPoly) -> CPoly {
        check_same_variable(self, rhs);
        if self.is_zero() || rhs.is_zero() {
            return CPoly {
                reciprocal: self.reciprocal,
                ..CPoly::zero()
            };
        }
        let mut out = vec![c(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly {
            reciprocal: self.reciprocal,
            ..CPoly::new(out)
        }
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, rhs: &CPoly) -> CPoly {
        check_same_variable(self, rhs);
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let out = (0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        CPoly {
            reciprocal: self.reciprocal,
            ..CPoly::new(out)
        }
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scale(c(-1.0, 0.0))
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, rhs: &CPoly) -> CPoly {
        self + &(-rhs)
    }
}

/// ∏_{j<n} base(q^{2(k+j)} u), or the infinite product truncated once the
/// remaining factors are within `tol` of one.
#[derive(Debug, Clone, PartialEq)]
pub struct QProduct {
    pub base: CPoly,
    pub shift: i32,
    pub count: Count,
    pub tol: Real,
}

impl QProduct {
    pub fn new(base: CPoly, shift: i32, count: Count) -> Self {
        Self {
            base,
            shift,
            count,
            tol: PRODUCT_TOL,
        }
    }

    pub fn eval(&self, u: Complex, params: &ModularParams) -> Result<Complex> {
        let q2 = params.q2();
        let r = q2.norm();
        let mut w = u * params.q_pow(2.0 * self.shift as Real);
        if self.base.reciprocal {
            return Err(Error::Domain(
                "q-products are formed from polynomials in u".into(),
            ));
        }
        let mut p = c(1.0, 0.0);
        match self.count {
            Count::Finite(n) => {
                for _ in 0..n {
                    p *= self.base.eval_var(w);
                    w *= q2;
                }
                Ok(p)
            }
            Count::Infinite => {
                if (self.base.coeff(0) - 1.0).norm() > 0.0 {
                    return Err(Error::Domain("infinite q-product needs base(0) = 1".into()));
                }
                for _ in 0..1_000_000 {
                    let wn = w.norm();
                    let bound: Real = self
                        .base
                        .coeffs()
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, z)| z.norm() * wn.powi(k as i32))
                        .sum();
                    if bound / (1.0 - r) < self.tol {
                        return Ok(p);
                    }
                    p *= self.base.eval_var(w);
                    w *= q2;
                }
                Err(Error::Convergence("q-product tail did not decay".into()))
            }
        }
    }
}

/// The four inhomogeneity polynomials: A(u) = ∏(1 + u/(q a_ν)),
/// B(u) = ∏(1 + q u/b_ν), and A′, B′ as polynomials in 1/u:
/// A′(1/u) = ∏(1 + q a_ν/u), B′(1/u) = ∏(1 + b_ν/(q u)).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPolys {
    pub a: CPoly,
    pub b: CPoly,
    pub a_prime: CPoly,
    pub b_prime: CPoly,
}

/// Builds [`ModelPolys`] from the multiplicative inhomogeneities
/// a_ν = e^{2πbα_ν}, b_ν = e^{2πbβ_ν} of the frame `params`.
pub fn model_polys(a_nu: &[Complex], b_nu: &[Complex], params: &ModularParams) -> ModelPolys {
    let q = params.q;
    let a: Vec<Complex> = a_nu.iter().map(|a| 1.0 / (q * a)).collect();
    let b: Vec<Complex> = b_nu.iter().map(|b| q / b).collect();
    let ap: Vec<Complex> = a_nu.iter().map(|a| q * a).collect();
    let bp: Vec<Complex> = b_nu.iter().map(|b| b / q).collect();
    ModelPolys {
        a: CPoly::from_linear_factors(&a),
        b: CPoly::from_linear_factors(&b),
        a_prime: CPoly::from_linear_factors(&ap).in_reciprocal(),
        b_prime: CPoly::from_linear_factors(&bp).in_reciprocal(),
    }
}
