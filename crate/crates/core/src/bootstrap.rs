//! The t²-bootstrap: χ₊, χ₋, the transfer-matrix corrections T_m and the
//! q-Wronskian W built from a candidate root set.
//!
//! χ₊(u) = Σ_m t^{2m} F_m(u) T₀(q^{2(m+1)}u; q²)_∞ where, order by order,
//!
//! ```text
//! T₀(q^{2m}u) F_m(u/q²) + A(q²u)B(u) F_{m−1}(q²u)
//!     = Σ_{k=0}^{m} T_k(u) F_{m−k}(u) T₀(q^{2(m−k+1)}u)⋯T₀(q^{2m}u).
//! ```
//!
//! χ₋ comes from the same recursion in v = 1/u (the mirror series), with
//! roots 1/u_ν and A(q²u)B(u) replaced by A′(v)B′(q²v).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::format::{ser_complex, ser_complex_vec, ser_real, ser_real_vec};
use crate::linalg::linear_solve;
use crate::model::ModelSpec;
use crate::modular::{theta1, Count, ModularParams};
use crate::poly::{sort_by_modulus_then_arg, CPoly, ModelPolys, QProduct};
use crate::{c, Complex, Error, Real, Result};

/// Relative residual above which an order of the bootstrap is rejected.
pub const SYSTEM_TOL: Real = 1e-10;

/// Relative distance below which two lattice-shifted roots collide.
pub const RESONANCE_TOL: Real = 1e-8;

/// F_m and T_m for one of the two series, with per-order diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    /// Roots of T₀ in the series variable.
    #[serde(serialize_with = "ser_complex_vec")]
    pub roots: Vec<Complex>,
    #[serde(serialize_with = "ser_polys")]
    pub f: Vec<CPoly>,
    #[serde(serialize_with = "ser_polys")]
    pub t: Vec<CPoly>,
    /// Relative residual of the full coefficient system, all rows, per
    /// order (index 0 unused).
    #[serde(serialize_with = "ser_real_vec")]
    pub residuals: Vec<Real>,
    /// |constant row| of the right-hand side before solving, per order.
    #[serde(serialize_with = "ser_real_vec")]
    pub constant_row: Vec<Real>,
    /// |top row| of the right-hand side before solving, per order.
    #[serde(serialize_with = "ser_real_vec")]
    pub top_row: Vec<Real>,
    #[serde(serialize_with = "ser_real_vec")]
    pub conditions: Vec<Real>,
}

fn ser_polys<S: serde::Serializer>(v: &[CPoly], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for p in v {
        let pairs: Vec<[Real; 2]> = p
            .coeffs()
            .iter()
            .map(|z| [crate::format::round12(z.re), crate::format::round12(z.im)])
            .collect();
        seq.serialize_element(&pairs)?;
    }
    seq.end()
}

impl Series {
    pub fn t0(&self) -> &CPoly {
        &self.t[0]
    }

    /// Σ_m t^{2m} F_m(v) T₀(q^{2(m+1)}v; q²)_∞.
    pub fn eval(&self, v: Complex, t2: Complex, params: &ModularParams) -> Result<Complex> {
        let order = self.f.len() - 1;
        let t0 = self.t0();
        let mut tail =
            QProduct::new(t0.clone(), order as i32 + 1, Count::Infinite).eval(v, params)?;
        let mut sum = c(0.0, 0.0);
        for m in (0..=order).rev() {
            if m < order {
                tail *= t0.eval(v * params.q_pow(2.0 * (m + 1) as Real));
            }
            sum = sum * t2 + self.f[m].eval(v) * tail;
        }
        Ok(sum)
    }

    /// T₀ + Σ_{m≥1} t^{2m} T_m as a polynomial.
    pub fn transfer_poly(&self, t2: Complex) -> CPoly {
        let mut acc = CPoly::zero();
        for p in self.t.iter().rev() {
            acc = &acc.scale(t2) + p;
        }
        acc
    }

    /// Power-series coefficients of the assembled series through v^{n_max}.
    pub fn coefficients(&self, t2: Complex, n_max: usize, params: &ModularParams) -> Vec<Complex> {
        let t0 = self.t0();
        let inv_max = self
            .roots
            .iter()
            .map(|r| 1.0 / r.norm())
            .fold(0.0, Real::max);
        let qn = params.q.norm();
        let truncate = |p: CPoly| CPoly::new(p.coeffs().iter().take(n_max + 1).copied().collect());
        let mut out = vec![c(0.0, 0.0); n_max + 1];
        let mut t2m = c(1.0, 0.0);
        for (m, fm) in self.f.iter().enumerate() {
            let mut prod = truncate(fm.clone());
            let mut j = m + 1;
            loop {
                let shrink = qn.powi(2 * j as i32) * inv_max;
                if shrink < 1e-18 && j > m + n_max + 4 {
                    break;
                }
                prod = truncate(&prod * &t0.q_scale(params.q_pow(2.0 * j as Real)));
                j += 1;
            }
            for (k, z) in prod.coeffs().iter().enumerate() {
                out[k] += t2m * z;
            }
            t2m *= t2;
        }
        out
    }
}

/// Raises `Resonance` when u_ν q^{2k} comes within tolerance of u_κ.
pub fn check_resonance(u: &[Complex], max_shift: usize, params: &ModularParams) -> Result<()> {
    for (i, ui) in u.iter().enumerate() {
        for (j, uj) in u.iter().enumerate() {
            if i == j {
                continue;
            }
            for k in 0..=max_shift {
                if k == 0 && j < i {
                    continue;
                }
                let d = (ui * params.q_pow(2.0 * k as Real) - uj).norm() / uj.norm();
                if d <= RESONANCE_TOL {
                    return Err(Error::Resonance {
                        first: i,
                        second: j,
                        shift: 2 * k,
                        distance: d,
                    });
                }
            }
        }
    }
    Ok(())
}

fn run_series(
    roots: Vec<Complex>,
    g: &CPoly,
    order: usize,
    params: &ModularParams,
) -> Result<Series> {
    let n = roots.len();
    let t0 = CPoly::from_roots(&roots)?;
    let q2pow = |j: usize| params.q_pow(2.0 * j as Real);
    // shifted[j] = T₀(q^{2j}v)
    let shifted: Vec<CPoly> = (0..=order + 1).map(|j| t0.q_scale(q2pow(j))).collect();
    let window = |from: usize, to: usize| (from..=to).fold(CPoly::one(), |p, j| &p * &shifted[j]);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut t1_ends = vec![c(0.0, 0.0); n + 1];
    t1_ends[0] = c(1.0, 0.0);
    t1_ends[n] += c(sign, 0.0);
    let t1_ends = CPoly::new(t1_ends);

    let mut f = vec![CPoly::one()];
    let mut t = vec![t0.clone()];
    let mut residuals = vec![0.0];
    let mut constant_row = vec![0.0];
    let mut top_row = vec![0.0];
    let mut conditions = vec![0.0];

    for m in 1..=order {
        let top = (m + 1) * n;
        let pi_m = window(1, m);
        let mut rhs = -&(g * &f[m - 1].q_scale(q2pow(1)));
        for k in 1..m {
            let term = &(&t[k] * &f[m - k]) * &window(m - k + 1, m);
            rhs = &rhs + &term;
        }
        let ends = if m == 1 {
            t1_ends.clone()
        } else {
            CPoly::zero()
        };
        rhs = &rhs + &(&ends * &pi_m);

        let mut cols: Vec<CPoly> = Vec::with_capacity(m * n + n - 1);
        for j in 1..=m * n {
            let a = shifted[m].shift_up(j).scale(params.q_pow(-2.0 * j as Real));
            let b = t0.shift_up(j);
            cols.push(&a - &b);
        }
        for j in 1..n {
            cols.push(-&pi_m.shift_up(j));
        }
        let unknowns = cols.len();
        let size = top - 1;
        debug_assert_eq!(unknowns, size);
        let mat = DMatrix::from_fn(size, unknowns, |r, k| cols[k].coeff(r + 1));
        let b = DVector::from_fn(size, |r, _| rhs.coeff(r + 1));
        let sol = linear_solve(&mat, &b)?;

        let mut fm = vec![c(0.0, 0.0); m * n + 1];
        fm[1..].copy_from_slice(&sol.x.as_slice()[..m * n]);
        let mut tm = ends.coeffs().to_vec();
        tm.resize(n + 1, c(0.0, 0.0));
        tm[1..n].copy_from_slice(&sol.x.as_slice()[m * n..m * n + n - 1]);
        let fm = CPoly::new(fm);
        let tm = CPoly::new(tm);

        // Full residual, every coefficient including the two dropped rows.
        let mut lhs = CPoly::zero();
        for (k, col) in cols.iter().enumerate() {
            lhs = &lhs + &col.scale(sol.x[k]);
        }
        let diff = &lhs - &rhs;
        let scale = (0..=top).map(|k| rhs.coeff(k).norm()).fold(1.0, Real::max);
        let res = (0..=top).map(|k| diff.coeff(k).norm()).fold(0.0, Real::max) / scale;
        if !(res <= SYSTEM_TOL) {
            return Err(Error::InconsistentSystem {
                order: m,
                residual: res,
            });
        }
        residuals.push(res);
        constant_row.push(rhs.coeff(0).norm());
        top_row.push(rhs.coeff(top).norm() / scale);
        conditions.push(sol.condition);
        f.push(fm);
        t.push(tm);
    }
    Ok(Series {
        roots,
        f,
        t,
        residuals,
        constant_row,
        top_row,
        conditions,
    })
}

/// Everything the bootstrap knows about one frame (primal or starred).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapState {
    #[serde(skip)]
    pub params: ModularParams,
    #[serde(skip)]
    pub spec: ModelSpec,
    #[serde(serialize_with = "ser_real_vec")]
    pub roots: Vec<Real>,
    pub order: usize,
    pub dual: bool,
    #[serde(serialize_with = "ser_complex_vec")]
    pub u_roots: Vec<Complex>,
    #[serde(serialize_with = "ser_complex")]
    pub t: Complex,
    #[serde(skip)]
    pub polys: ModelPolys,
    pub plus: Series,
    pub minus: Series,
}

impl BootstrapState {
    /// Runs both series to order M. With `dual` set, every quantity is
    /// built in the starred frame (q → q*, t → t*, a_ν → a_ν*, …).
    pub fn run(
        spec: &ModelSpec,
        roots: &[Real],
        order: usize,
        params: &ModularParams,
        dual: bool,
    ) -> Result<Self> {
        spec.validate()?;
        if roots.len() != spec.n() {
            return Err(Error::Validation(format!(
                "{} roots supplied for a chain of length {}",
                roots.len(),
                spec.n()
            )));
        }
        let sum: Real = roots.iter().sum();
        let scale = roots.iter().map(|x| x.abs()).fold(1.0, Real::max);
        if sum.abs() > 1e-12 * scale {
            return Err(Error::Validation(format!("roots sum to {sum}, not zero")));
        }
        let frame = if dual { params.star() } else { *params };
        let t = spec.t(&frame);
        if t.norm_sqr() >= 1.0 {
            return Err(Error::Validation(format!("|t^2| = {} >= 1", t.norm_sqr())));
        }
        let u_roots: Vec<Complex> = roots.iter().map(|x| frame.u(c(*x, 0.0))).collect();
        check_resonance(&u_roots, order + 1, &frame)?;
        let polys = spec.polys(&frame);
        let q2 = frame.q2();

        let g_plus = &polys.a.q_scale(q2) * &polys.b;
        let plus = run_series(u_roots.clone(), &g_plus, order, &frame)?;

        let mut ap = polys.a_prime.clone();
        ap.reciprocal = false;
        let mut bp = polys.b_prime.clone();
        bp.reciprocal = false;
        let g_minus = &ap * &bp.q_scale(q2);
        let mirror: Vec<Complex> = u_roots.iter().map(|u| 1.0 / u).collect();
        let minus = run_series(mirror, &g_minus, order, &frame)?;

        Ok(Self {
            params: frame,
            spec: spec.clone(),
            roots: roots.to_vec(),
            order,
            dual,
            u_roots,
            t,
            polys,
            plus,
            minus,
        })
    }

    pub fn t2(&self) -> Complex {
        self.t * self.t
    }

    pub fn n(&self) -> usize {
        self.roots.len()
    }

    pub fn chi_plus(&self, u: Complex) -> Result<Complex> {
        self.plus.eval(u, self.t2(), &self.params)
    }

    pub fn chi_minus(&self, u: Complex) -> Result<Complex> {
        if u.norm() == 0.0 {
            return Err(Error::Domain("chi_minus is undefined at u = 0".into()));
        }
        self.minus.eval(1.0 / u, self.t2(), &self.params)
    }

    /// tT(u) = T₀(u) + Σ t^{2m} T_m(u) as a polynomial.
    pub fn transfer_poly(&self) -> CPoly {
        self.plus.transfer_poly(self.t2())
    }

    /// The same transfer polynomial reassembled from the mirror series.
    pub fn transfer_poly_from_mirror(&self) -> CPoly {
        let n = self.n();
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mirror = self.minus.transfer_poly(self.t2());
        let coeffs = (0..=n).map(|k| mirror.coeff(n - k) * sign).collect();
        CPoly::new(coeffs)
    }

    /// tT(u).
    pub fn t_transfer(&self, u: Complex) -> Complex {
        self.transfer_poly().eval(u)
    }

    /// Integrals of motion: coefficients of T(u) = (tT)(u)/t.
    pub fn transfer_coefficients(&self) -> Vec<Complex> {
        let p = self.transfer_poly();
        (0..=self.n()).map(|k| p.coeff(k) / self.t).collect()
    }

    /// χ₊(u/q²) + t²A(q²u)B(u)χ₊(q²u) − tT(u)χ₊(u).
    pub fn chi_plus_residual(&self, u: Complex) -> Result<Complex> {
        let q2 = self.params.q2();
        Ok(self.chi_plus(u / q2)?
            + self.t2()
                * self.polys.a.eval(q2 * u)
                * self.polys.b.eval(u)
                * self.chi_plus(q2 * u)?
            - self.t_transfer(u) * self.chi_plus(u)?)
    }

    /// χ₋(q²u) + t²A′(1/u)B′(q²/u)χ₋(u/q²) − tT(u)(−u)^{−N}χ₋(u).
    pub fn chi_minus_residual(&self, u: Complex) -> Result<Complex> {
        let q2 = self.params.q2();
        let n = self.n() as i32;
        Ok(self.chi_minus(q2 * u)?
            + self.t2()
                * self.polys.a_prime.eval(u)
                * self.polys.b_prime.eval(u / q2)
                * self.chi_minus(u / q2)?
            - self.t_transfer(u) * (-u).powi(-n) * self.chi_minus(u)?)
    }

    /// W(u) = χ₊(u/q²)χ₋(u) − t²(−qa)^N A(u)B′(q²/u)χ₊(u)χ₋(u/q²).
    pub fn wronskian(&self, u: Complex) -> Result<Complex> {
        let q2 = self.params.q2();
        let n = self.n() as i32;
        let qa = -self.params.q * self.spec.a(&self.params);
        let first = self.chi_plus(u / q2)? * self.chi_minus(u)?;
        let second = self.t2()
            * qa.powi(n)
            * self.polys.a.eval(u)
            * self.polys.b_prime.eval(u / q2)
            * self.chi_plus(u)?
            * self.chi_minus(u / q2)?;
        Ok(first - second)
    }

    /// W(u) − (−u)^N W(q²u).
    pub fn wshift_residual(&self, u: Complex) -> Result<Complex> {
        let n = self.n() as i32;
        Ok(self.wronskian(u)? - (-u).powi(n) * self.wronskian(self.params.q2() * u)?)
    }

    /// ∏ θ₁(u/u_ν), the t → 0 limit of W.
    pub fn theta_product(&self, u: Complex) -> Result<Complex> {
        self.u_roots
            .iter()
            .try_fold(c(1.0, 0.0), |acc, r| Ok(acc * theta1(u / r, &self.params)?))
    }

    /// Zeros of W matched against the input roots, and the fitted
    /// normalisation ϱ. Roots are folded by powers of q² into one annulus
    /// |q²|r < |u| < r whose boundary sits in the widest gap between them;
    /// the zeros found there are unfolded again.
    pub fn w_root_drift(&self) -> Result<WDrift> {
        let n = self.n();
        let q2 = self.params.q2();
        let width = -q2.norm().ln();
        let logs: Vec<Real> = self.u_roots.iter().map(|u| u.norm().ln()).collect();
        let mut folded: Vec<Real> = logs.iter().map(|l| l.rem_euclid(width)).collect();
        folded.sort_by(Real::total_cmp);
        let mut top = folded[0] + width;
        let mut gap = folded[0] + width - folded[n - 1];
        for w in folded.windows(2) {
            if w[1] - w[0] > gap {
                gap = w[1] - w[0];
                top = w[1];
            }
        }
        if gap < 1e-6 * width {
            return Err(Error::Domain("W zeros fill the annulus boundary".into()));
        }
        // log|r| sits mid-gap, above `top − gap`.
        let log_outer = top - 0.5 * gap;
        let outer = log_outer.exp();
        let inner = outer * q2.norm();
        let w = |u: Complex| self.wronskian(u);
        let count = winding(&w, outer)? - winding(&w, inner)?;
        if count != n as i64 {
            return Err(Error::RootCount {
                expected: n,
                found: count,
            });
        }
        let mut zeros = Vec::with_capacity(n);
        for (u0, l) in self.u_roots.iter().zip(&logs) {
            let k = ((log_outer - l) / width).floor() as i32;
            let fold = q2.powi(-k);
            let z = newton_complex(&w, u0 * fold, 1e-14, 60)?;
            zeros.push(z / fold);
        }
        let mut pairs: Vec<(Complex, Real)> = zeros
            .iter()
            .zip(&self.u_roots)
            .map(|(z, u)| (*z, (z / u - 1.0).norm()))
            .collect();
        let mut keys: Vec<Complex> = pairs.iter().map(|p| p.0).collect();
        sort_by_modulus_then_arg(&mut keys);
        pairs.sort_by_key(|p| keys.iter().position(|k| *k == p.0));
        let (zeros, drifts): (Vec<Complex>, Vec<Real>) = pairs.into_iter().unzip();
        let probe = self.params.q * Complex::from_polar(1.0, 0.5);
        let denom = zeros.iter().try_fold(c(1.0, 0.0), |acc, z| {
            Ok::<_, Error>(acc * theta1(probe / z, &self.params)?)
        })?;
        let rho = self.wronskian(probe)? / denom;
        Ok(WDrift {
            zeros,
            drifts,
            rho,
            count: n,
        })
    }

    /// Δ′_{γ,n}: the predicted leading correction of the n-th χ₊ zero
    /// family around u_γ.
    pub fn delta_prime(&self, gamma: usize, n: usize) -> Complex {
        let ug = self.u_roots[gamma];
        let p = &self.params;
        let t0p = |z: Complex, skip: Option<usize>| -> Complex {
            self.u_roots
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, uv)| 1.0 - uv * z)
                .product()
        };
        let mut num = c(1.0, 0.0);
        let mut den = c(1.0, 0.0);
        for k in 0..n {
            let qk = p.q_pow(2.0 * k as Real);
            num *= self.polys.a_prime.eval_var(qk / ug)
                * self.polys.b_prime.eval_var(p.q2() * qk / ug);
            den *= t0p(qk / ug, if k == 0 { Some(gamma) } else { None });
            den *= t0p(p.q2() * qk / ug, None);
        }
        num / den
    }

    /// Δ_{γ,n}: the analogue for the χ₋ zero families.
    pub fn delta(&self, gamma: usize, n: usize) -> Complex {
        let ug = self.u_roots[gamma];
        let p = &self.params;
        let t0 = |u: Complex, skip: Option<usize>| -> Complex {
            self.u_roots
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, uv)| 1.0 - u / uv)
                .product()
        };
        let mut num = c(1.0, 0.0);
        let mut den = c(1.0, 0.0);
        for k in 0..n {
            let qk = p.q_pow(2.0 * k as Real);
            num *= self.polys.a.eval(p.q2() * qk * ug) * self.polys.b.eval(qk * ug);
            den *= t0(qk * ug, if k == 0 { Some(gamma) } else { None });
            den *= t0(p.q2() * qk * ug, None);
        }
        num / den
    }

    /// Locates the zeros of χ₊ near u_γq^{−2n} and of χ₋ near u_γq^{2n}
    /// and compares their displacement with t^{2n}Δ′ and t^{2n}Δ.
    pub fn zero_asymptotics(&self, n_max: usize) -> Result<ZeroAsymptotics> {
        let mut entries = Vec::new();
        let t2 = self.t2();
        for n in 1..=n_max {
            let t2n = t2.powu(n as u32);
            let qn = self.params.q_pow(2.0 * n as Real);
            for gamma in 0..self.n() {
                let ug = self.u_roots[gamma];
                let dp = self.delta_prime(gamma, n);
                let dm = self.delta(gamma, n);
                for lead in [t2n * dp, t2n * dm] {
                    if lead.norm() < 1e-11 {
                        return Err(Error::Precision(format!(
                            "correction {:.3e} at n = {n} is below working precision",
                            lead.norm()
                        )));
                    }
                }
                let zp = newton_complex(&|u| self.chi_plus(u), ug / qn, 1e-15, 80)?;
                let u_gn = zp * qn;
                let measured_plus = ug / u_gn - 1.0;
                let zm = newton_complex(&|u| self.chi_minus(u), ug * qn, 1e-15, 80)?;
                let u_gn_prime = zm / qn;
                let measured_minus = u_gn_prime / ug - 1.0;
                entries.push(ZeroEntry {
                    gamma,
                    n,
                    u_zero: u_gn,
                    u_zero_prime: u_gn_prime,
                    delta_prime: dp,
                    delta: dm,
                    measured_plus,
                    measured_minus,
                    rel_err_plus: (measured_plus - t2n * dp).norm() / (t2n * dp).norm(),
                    rel_err_minus: (measured_minus - t2n * dm).norm() / (t2n * dm).norm(),
                });
            }
        }
        Ok(ZeroAsymptotics { entries })
    }

    /// Coefficients χ_{+,k} of χ₊(u) = Σ χ_{+,k}u^k, k ≤ n_max.
    pub fn chi_plus_coefficients(&self, n_max: usize) -> Vec<Complex> {
        self.plus.coefficients(self.t2(), n_max, &self.params)
    }

    /// Coefficients χ_{−,k} of χ₋(u) = Σ χ_{−,k}u^{−k}, k ≤ n_max.
    pub fn chi_minus_coefficients(&self, n_max: usize) -> Vec<Complex> {
        self.minus.coefficients(self.t2(), n_max, &self.params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bootstrap state serializes")
    }
}

/// Zeros of W found near the input roots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WDrift {
    #[serde(serialize_with = "ser_complex_vec")]
    pub zeros: Vec<Complex>,
    #[serde(serialize_with = "ser_real_vec")]
    pub drifts: Vec<Real>,
    #[serde(serialize_with = "ser_complex")]
    pub rho: Complex,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroEntry {
    pub gamma: usize,
    pub n: usize,
    #[serde(serialize_with = "ser_complex")]
    pub u_zero: Complex,
    #[serde(serialize_with = "ser_complex")]
    pub u_zero_prime: Complex,
    #[serde(serialize_with = "ser_complex")]
    pub delta_prime: Complex,
    #[serde(serialize_with = "ser_complex")]
    pub delta: Complex,
    /// u_γ/u_{γ,n} − 1
    #[serde(serialize_with = "ser_complex")]
    pub measured_plus: Complex,
    /// u′_{γ,n}/u_γ − 1
    #[serde(serialize_with = "ser_complex")]
    pub measured_minus: Complex,
    #[serde(serialize_with = "ser_real")]
    pub rel_err_plus: Real,
    #[serde(serialize_with = "ser_real")]
    pub rel_err_minus: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroAsymptotics {
    pub entries: Vec<ZeroEntry>,
}

/// Winding number of f around the circle |u| = r.
pub(crate) fn winding<F: Fn(Complex) -> Result<Complex>>(f: &F, r: Real) -> Result<i64> {
    let samples = 512;
    let mut total = 0.0;
    let mut prev = f(Complex::from_polar(r, 0.0))?;
    for k in 1..=samples {
        let a0 = 2.0 * PI * (k - 1) as Real / samples as Real;
        let a1 = 2.0 * PI * k as Real / samples as Real;
        total += arg_increment(f, r, a0, a1, prev, 0)?;
        prev = f(Complex::from_polar(r, a1))?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn arg_increment<F: Fn(Complex) -> Result<Complex>>(
    f: &F,
    r: Real,
    a0: Real,
    a1: Real,
    v0: Complex,
    depth: usize,
) -> Result<Real> {
    let v1 = f(Complex::from_polar(r, a1))?;
    if v0.norm() == 0.0 || v1.norm() == 0.0 {
        return Err(Error::Domain("zero on the counting contour".into()));
    }
    let d = (v1 / v0).arg();
    if d.abs() < 0.5 || depth > 20 {
        return Ok(d);
    }
    let am = 0.5 * (a0 + a1);
    let vm = f(Complex::from_polar(r, am))?;
    Ok(arg_increment(f, r, a0, am, v0, depth + 1)? + arg_increment(f, r, am, a1, vm, depth + 1)?)
}

/// Newton iteration for an analytic f with a central-difference
/// derivative.
pub(crate) fn newton_complex<F: Fn(Complex) -> Result<Complex>>(
    f: &F,
    start: Complex,
    tol: Real,
    max_iter: usize,
) -> Result<Complex> {
    let mut z = start;
    let mut last = Real::INFINITY;
    for _ in 0..max_iter {
        let h = 1e-6 * z.norm().max(1e-3);
        let fz = f(z)?;
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if d.norm() == 0.0 {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: fz.norm(),
            });
        }
        let step = fz / d;
        z -= step;
        let rel = step.norm() / z.norm().max(1e-300);
        if rel < tol || (rel < 1e-10 && rel >= last) {
            return Ok(z);
        }
        last = rel;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: f(z)?.norm(),
    })
}

/// Closed forms for the single-site chain.
pub mod toy {
    use super::*;

    fn poch(z: Complex, nome: Complex, n: usize) -> Complex {
        crate::modular::qpoch(z, nome, Count::Finite(n)).expect("finite product")
    }

    /// h_j(q², q⁴, …, q^{2m}): the t^{2j} coefficient of 1/(q²t²; q²)_m.
    pub fn h(m: usize, j: usize, params: &ModularParams) -> Complex {
        let mut row = vec![c(0.0, 0.0); j + 1];
        row[0] = c(1.0, 0.0);
        for k in 1..=m {
            let x = params.q_pow(2.0 * k as Real);
            for d in 1..=j {
                let prev = row[d - 1];
                row[d] += x * prev;
            }
        }
        row[j]
    }

    /// q^{m(m+1)} (−qa; q²)_m (−qb; q²)_m / (q²; q²)_m.
    pub fn c_m(m: usize, a: Complex, b: Complex, params: &ModularParams) -> Complex {
        let q = params.q;
        let q2 = params.q2();
        params.q_pow((m * (m + 1)) as Real) * poch(-q * a, q2, m) * poch(-q * b, q2, m)
            / poch(q2, q2, m)
    }

    /// F_M of the t²-expansion for N = 1, from the closed-form series.
    pub fn f_closed(big_m: usize, a: Complex, b: Complex, params: &ModularParams) -> CPoly {
        let mut acc = CPoly::zero();
        for m in 0..=big_m {
            let coef = c_m(m, a, b, params) * h(m, big_m - m, params);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mono = CPoly::one().shift_up(m).scale(c(sign, 0.0) * coef);
            // (q^{2(m+1)}u; q²)_{M−m}
            let slopes: Vec<Complex> = (0..big_m - m)
                .map(|k| -params.q_pow(2.0 * (m + 1 + k) as Real))
                .collect();
            let tail = CPoly::from_linear_factors(&slopes);
            acc = &acc + &(&mono * &tail);
        }
        acc
    }

    /// First-order coefficient F₁(u) = −q²(1+qa)(1+qb)u/(1−q²).
    pub fn f1(a: Complex, b: Complex, params: &ModularParams) -> CPoly {
        let q = params.q;
        let q2 = params.q2();
        CPoly::new(vec![
            c(0.0, 0.0),
            -q2 * (1.0 + q * a) * (1.0 + q * b) / (1.0 - q2),
        ])
    }

    /// χ₊(u) summed from the closed-form series to convergence.
    pub fn chi_plus(
        u: Complex,
        a: Complex,
        b: Complex,
        t: Complex,
        params: &ModularParams,
    ) -> Result<Complex> {
        let q2 = params.q2();
        let t2 = t * t;
        let mut sum = c(0.0, 0.0);
        for m in 0..200 {
            let term = c_m(m, a, b, params) * (-t2 * u).powu(m as u32) / poch(q2 * t2, q2, m)
                * crate::modular::qpoch(
                    params.q_pow(2.0 * (m + 1) as Real) * u,
                    q2,
                    Count::Infinite,
                )?;
            sum += term;
            if term.norm() < 1e-18 * sum.norm().max(1e-300) && m > 2 {
                return Ok(sum);
            }
        }
        Err(Error::Convergence("toy chi series".into()))
    }

    /// W(u) = (−qt²a; q²)_∞(−qt²b; q²)_∞ / (q²t²; q²)_∞² · θ₁(u).
    pub fn wronskian(
        u: Complex,
        a: Complex,
        b: Complex,
        t: Complex,
        params: &ModularParams,
    ) -> Result<Complex> {
        let q = params.q;
        let q2 = params.q2();
        let t2 = t * t;
        let pre = crate::modular::qpoch(-q * t2 * a, q2, Count::Infinite)?
            * crate::modular::qpoch(-q * t2 * b, q2, Count::Infinite)?
            / crate::modular::qpoch(q2 * t2, q2, Count::Infinite)?.powi(2);
        Ok(pre * theta1(u, params)?)
    }

    /// Δ′_{1,1} = (1+qa)(1+qb)/(1−q²).
    pub fn delta_prime_11(a: Complex, b: Complex, params: &ModularParams) -> Complex {
        let q = params.q;
        (1.0 + q * a) * (1.0 + q * b) / (1.0 - params.q2())
    }

    /// Tolerance on F_m coefficients against the closed form.
    pub const COEFFICIENT_TOL: Real = 1e-10;
    /// Tolerance on W against the closed form at the probe points.
    pub const WRONSKIAN_TOL: Real = 1e-9;
    /// Tolerance on T₁ = 1 − u and T_{m≥2} = 0.
    pub const TRANSFER_TOL: Real = 1e-11;

    const PROBES: [(Real, Real); 4] = [(0.3, 0.2), (-0.5, 0.1), (0.1, -0.4), (0.8, 0.0)];

    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct CoefficientRow {
        pub m: usize,
        #[serde(serialize_with = "ser_real")]
        pub max_abs_diff: Real,
        #[serde(serialize_with = "ser_real")]
        pub max_abs_coeff: Real,
    }

    /// Bootstrap against the N = 1 closed forms.
    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct OracleReport {
        pub order: usize,
        #[serde(serialize_with = "ser_complex")]
        pub t2: Complex,
        pub coefficients: Vec<CoefficientRow>,
        #[serde(serialize_with = "ser_real")]
        pub coefficient_diff: Real,
        #[serde(serialize_with = "ser_real")]
        pub wronskian_diff: Real,
        #[serde(serialize_with = "ser_real")]
        pub chi_plus_diff: Real,
        #[serde(serialize_with = "ser_complex_vec")]
        pub t1: Vec<Complex>,
        #[serde(serialize_with = "ser_real")]
        pub t1_diff: Real,
        #[serde(serialize_with = "ser_real")]
        pub t_higher_max: Real,
        pub passed: bool,
    }

    /// Runs the bootstrap for a single-site chain (root x₁ = 0) and
    /// compares F_m, χ₊, W and T_m with the closed forms. `tol`, when
    /// given, replaces all three tolerances.
    pub fn oracle_report(
        spec: &ModelSpec,
        order: usize,
        params: &ModularParams,
        tol: Option<Real>,
    ) -> Result<OracleReport> {
        if spec.n() != 1 {
            return Err(Error::Validation(format!(
                "the closed-form oracle needs N = 1, got N = {}",
                spec.n()
            )));
        }
        let s = BootstrapState::run(spec, &[0.0], order, params, false)?;
        let a = spec.a(params);
        let b = 1.0 / a;
        let coefficients: Vec<CoefficientRow> = (0..=order)
            .map(|m| {
                let closed = f_closed(m, a, b, params);
                let len = closed.coeffs().len().max(s.plus.f[m].coeffs().len());
                let diff = (0..len)
                    .map(|k| (closed.coeff(k) - s.plus.f[m].coeff(k)).norm())
                    .fold(0.0, Real::max);
                let size = closed
                    .coeffs()
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, Real::max);
                CoefficientRow {
                    m,
                    max_abs_diff: diff,
                    max_abs_coeff: size,
                }
            })
            .collect();
        let coefficient_diff = coefficients
            .iter()
            .map(|r| r.max_abs_diff)
            .fold(0.0, Real::max);
        let mut wronskian_diff: Real = 0.0;
        let mut chi_plus_diff: Real = 0.0;
        for (re, im) in PROBES {
            let u = c(re, im);
            let w = s.wronskian(u)? - wronskian(u, a, b, s.t, params)?;
            wronskian_diff = wronskian_diff.max(w.norm());
            let x = s.chi_plus(u)? - chi_plus(u, a, b, s.t, params)?;
            chi_plus_diff = chi_plus_diff.max(x.norm());
        }
        let t1 = s
            .plus
            .t
            .get(1)
            .map(|p| p.coeffs().to_vec())
            .unwrap_or_default();
        let t1_diff = if order >= 1 {
            (0..t1.len().max(2))
                .map(|k| {
                    let want = [c(1.0, 0.0), c(-1.0, 0.0)]
                        .get(k)
                        .copied()
                        .unwrap_or_default();
                    (s.plus.t[1].coeff(k) - want).norm()
                })
                .fold(0.0, Real::max)
        } else {
            0.0
        };
        let t_higher_max = s
            .plus
            .t
            .iter()
            .skip(2)
            .flat_map(|p| p.coeffs().iter().map(|z| z.norm()))
            .fold(0.0, Real::max);
        let (ct, wt, tt) = match tol {
            Some(t) => (t, t, t),
            None => (COEFFICIENT_TOL, WRONSKIAN_TOL, TRANSFER_TOL),
        };
        let passed = coefficient_diff <= ct
            && wronskian_diff <= wt
            && chi_plus_diff <= wt
            && t1_diff <= tt
            && t_higher_max <= tt;
        Ok(OracleReport {
            order,
            t2: s.t2(),
            coefficients,
            coefficient_diff,
            wronskian_diff,
            chi_plus_diff,
            t1,
            t1_diff,
            t_higher_max,
            passed,
        })
    }
}
