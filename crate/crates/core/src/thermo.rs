//! Thermodynamic ground state: external densities, the sech kernel, the
//! ground-state density and the integrals built on it.
//!
//! A density is stored as a weighted point measure. Atoms are exact;
//! smooth densities carry their own quadrature nodes, so every integral
//! against P_A, P_B or P_AB is a finite sum.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{g12, ser_complex, ser_real};
use crate::modular::{log_one_minus_exp, log_phi, log_phi2, ModularParams, Side};
use crate::quad::{gauss_legendre, integrate_breaks, integrate_real, QuadOptions};
use crate::{c, Complex, Error, Real, Result, I};

/// Tolerance on unit mass and on the centring μ_A = −μ_B.
pub const MASS_TOL: Real = 1e-10;

/// Closed-form and direct-quadrature transfer-matrix densities must agree
/// to this; a larger gap means the branch pairing is wrong.
pub const BRANCH_TOL: Real = 1e-6;

/// Number of e-folds of the sech kernel kept on either side of the
/// support when integrating against P.
const TAIL_EFOLDS: Real = 45.0;

const GAUSSIAN_NODES: usize = 96;
const GAUSSIAN_HALF_WIDTH: Real = 9.0;
const PRODUCT_CUTOFF: Real = 1e-18;
const MAX_TERMS: usize = 100_000;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Atoms,
    Smooth,
}

/// Unit-mass point measure Σ m_i δ(x − ξ_i).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub kind: DensityKind,
    masses: Vec<Real>,
    points: Vec<Real>,
}

impl Density {
    /// Atoms from (weight, position) pairs.
    pub fn atoms(pairs: &[(Real, Real)]) -> Result<Self> {
        let d = Self {
            kind: DensityKind::Atoms,
            masses: pairs.iter().map(|p| p.0).collect(),
            points: pairs.iter().map(|p| p.1).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    /// Equal atoms of mass 1/n at the given points.
    pub fn atoms_uniform(points: &[Real]) -> Self {
        let m = 1.0 / points.len().max(1) as Real;
        Self {
            kind: DensityKind::Atoms,
            masses: vec![m; points.len()],
            points: points.to_vec(),
        }
    }

    pub fn single(point: Real) -> Self {
        Self::atoms_uniform(&[point])
    }

    /// Normal density, discretised by Gauss–Legendre on mean ± 9 widths.
    pub fn gaussian(mean: Real, width: Real) -> Result<Self> {
        if !(width > 0.0) || !mean.is_finite() || !width.is_finite() {
            return Err(Error::Validation(format!(
                "gaussian density needs a finite positive width, got {width}"
            )));
        }
        let (nodes, weights) = gauss_legendre(
            GAUSSIAN_NODES,
            mean - GAUSSIAN_HALF_WIDTH * width,
            mean + GAUSSIAN_HALF_WIDTH * width,
        );
        let norm = 1.0 / (width * (2.0 * PI).sqrt());
        let values: Vec<Real> = nodes
            .iter()
            .map(|x| norm * (-0.5 * ((x - mean) / width).powi(2)).exp())
            .collect();
        Self::sampled(&nodes, &weights, &values)
    }

    /// Smooth density given by its values on a quadrature rule.
    pub fn sampled(nodes: &[Real], weights: &[Real], values: &[Real]) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.len() != values.len() {
            return Err(Error::Validation(
                "sampled density needs equally many nodes, weights and values".into(),
            ));
        }
        let d = Self {
            kind: DensityKind::Smooth,
            masses: weights.iter().zip(values).map(|(w, v)| w * v).collect(),
            points: nodes.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Validation("density has no support".into()));
        }
        if self
            .masses
            .iter()
            .chain(&self.points)
            .any(|v| !v.is_finite())
            || self.masses.iter().any(|m| *m < 0.0)
        {
            return Err(Error::Validation(
                "density masses must be finite and non-negative".into(),
            ));
        }
        let total = self.total();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation(format!(
                "density has total mass {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn masses(&self) -> &[Real] {
        &self.masses
    }

    pub fn points(&self) -> &[Real] {
        &self.points
    }

    /// (mass, position) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Real, Real)> + '_ {
        self.masses.iter().copied().zip(self.points.iter().copied())
    }

    pub fn total(&self) -> Real {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> Real {
        self.iter().map(|(m, x)| m * x).sum()
    }

    /// Raw second moment ∫x² P.
    pub fn second_moment(&self) -> Real {
        self.iter().map(|(m, x)| m * x * x).sum()
    }

    /// ∫P(x) e^{−2πixy} dx.
    pub fn fourier(&self, y: Real) -> Complex {
        self.iter()
            .map(|(m, x)| m * Complex::from_polar(1.0, -2.0 * PI * x * y))
            .sum()
    }

    /// P(x) → P(−x).
    pub fn reflected(&self) -> Self {
        Self {
            kind: self.kind,
            masses: self.masses.clone(),
            points: self.points.iter().map(|x| -x).collect(),
        }
    }

    fn sorted_pairs(&self) -> Vec<(Real, Real)> {
        let mut v: Vec<(Real, Real)> = self.iter().map(|(m, x)| (x, m)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// External densities P_A, P_B with their moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityModel {
    pub a: Density,
    pub b: Density,
    /// μ = μ_A = −μ_B.
    pub mu: Real,
    pub s_a: Real,
    pub s_b: Real,
    /// P_B(x) = P_A(−x).
    pub symmetric: bool,
    /// Single atoms at ±μ.
    pub homogeneous: bool,
}

impl DensityModel {
    pub fn new(a: Density, b: Density) -> Result<Self> {
        a.validate()?;
        b.validate()?;
        let mu_a = a.mean();
        let mu_b = b.mean();
        if (mu_a + mu_b).abs() > MASS_TOL * (1.0 + mu_a.abs()) {
            return Err(Error::Validation(format!(
                "mean of P_B is {mu_b}, expected -mean of P_A = {}",
                -mu_a
            )));
        }
        let reflected = a.reflected().sorted_pairs();
        let symmetric = reflected.len() == b.points.len()
            && reflected
                .iter()
                .zip(b.sorted_pairs())
                .all(|(p, q)| (p.0 - q.0).abs() <= MASS_TOL && (p.1 - q.1).abs() <= MASS_TOL);
        let homogeneous = a.points.len() == 1 && b.points.len() == 1 && symmetric;
        Ok(Self {
            mu: mu_a,
            s_a: a.second_moment(),
            s_b: b.second_moment(),
            a,
            b,
            symmetric,
            homogeneous,
        })
    }

    /// P_A = δ(x − μ), P_B = δ(x + μ).
    pub fn homogeneous(mu: Real) -> Self {
        Self::new(Density::single(mu), Density::single(-mu)).expect("single atoms are valid")
    }

    /// Atoms of P_AB = P_A + P_B (total mass 2).
    pub fn ab(&self) -> impl Iterator<Item = (Real, Real)> + '_ {
        self.a.iter().chain(self.b.iter())
    }

    pub fn ab_fourier(&self, y: Real) -> Complex {
        self.a.fourier(y) + self.b.fourier(y)
    }

    /// S_P = η² + (S_A + S_B)/2 on the solution of the functional equation.
    pub fn expected_s_p(&self, params: &ModularParams) -> Real {
        params.eta * params.eta + 0.5 * (self.s_a + self.s_b)
    }

    /// Integration window outside which P is below e^{−45}.
    fn window(&self, params: &ModularParams) -> (Real, Real) {
        let tail = TAIL_EFOLDS * 2.0 * params.eta / PI;
        let (lo, hi) = self
            .ab()
            .fold((Real::INFINITY, Real::NEG_INFINITY), |(l, h), (_, x)| {
                (l.min(x), h.max(x))
            });
        (lo - tail, hi + tail)
    }
}

/// Kernel parameters w(x), p and the output grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: Real,
    pub max: Real,
    pub step: Real,
}

impl Grid {
    pub fn new(min: Real, max: Real, step: Real) -> Result<Self> {
        let g = Self { min, max, step };
        if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Validation(format!(
                "grid {min}:{max}:{step} needs min <= max and step > 0"
            )));
        }
        Ok(g)
    }

    /// min + k·step for k = 0..=round((max − min)/step).
    pub fn points(&self) -> Vec<Real> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.min + k as Real * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoContext {
    pub params: ModularParams,
    pub model: DensityModel,
    pub grid: Grid,
}

impl ThermoContext {
    pub fn new(params: ModularParams, model: DensityModel, grid: Grid) -> Self {
        Self {
            params,
            model,
            grid,
        }
    }

    pub fn w(&self, x: Complex) -> Complex {
        kernel_w(x, &self.params)
    }

    pub fn p(&self) -> Real {
        kernel_p(&self.params)
    }

    /// Evaluates the requested functions on the grid, in grid order.
    pub fn profile(&self, functions: &[ProfileFn]) -> Result<Profile> {
        let xs = self.grid.points();
        let rows: Vec<Result<Vec<Complex>>> = xs
            .par_iter()
            .map(|&x| {
                functions
                    .iter()
                    .map(|f| f.eval(x, &self.model, &self.params))
                    .collect()
            })
            .collect();
        let values = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Profile {
            functions: functions.to_vec(),
            x: xs,
            values,
        })
    }
}

/// w(x) = e^{πx/2η}.
pub fn kernel_w(x: Complex, params: &ModularParams) -> Complex {
    (PI * x / (2.0 * params.eta)).exp()
}

/// p = e^{−πσ/2η}.
pub fn kernel_p(params: &ModularParams) -> Real {
    (-PI * params.sigma / (2.0 * params.eta)).exp()
}

/// K(x) = 1/(4η cosh(πx/2η)).
pub fn kernel_k(x: Complex, params: &ModularParams) -> Result<Complex> {
    let ch = (PI * x / (2.0 * params.eta)).cosh();
    if ch.norm() < 1e-12 {
        return Err(Error::Pole(format!("{x}")));
    }
    Ok(1.0 / (4.0 * params.eta * ch))
}

fn kernel_real(x: Real, eta: Real) -> Real {
    1.0 / (4.0 * eta * (PI * x / (2.0 * eta)).cosh())
}

/// ∫K(x) e^{−2πixy} dx = 1/(2 cosh(2πηy)).
pub fn kernel_fourier(y: Real, params: &ModularParams) -> Real {
    0.5 / (2.0 * PI * params.eta * y).cosh()
}

/// y(x) = ∫_{−∞}^x K = (1/2πi) log((1+iw)/(1−iw)), principal branch.
pub fn kernel_y(x: Complex, params: &ModularParams) -> Complex {
    let w = kernel_w(x, params);
    ((1.0 + I * w) / (1.0 - I * w)).ln() / (2.0 * PI * I)
}

fn kernel_y_real(x: Real, eta: Real) -> Real {
    (PI * x / (2.0 * eta)).exp().atan() / PI
}

/// P(x) = ∫K(x − x₀) P_AB(x₀) dx₀. For the homogeneous symmetric model
/// the two-cosh closed form is also evaluated and compared.
pub fn ground_density(x: Real, model: &DensityModel, params: &ModularParams) -> Result<Real> {
    let eta = params.eta;
    let p: Real = model.ab().map(|(m, xi)| m * kernel_real(x - xi, eta)).sum();
    if model.homogeneous {
        let mu = model.mu;
        let closed = kernel_real(x - mu, eta) + kernel_real(x + mu, eta);
        if (closed - p).abs() > 1e-13 * (1.0 + closed) {
            return Err(Error::Precision(format!(
                "closed-form density {closed} differs from convolution {p}"
            )));
        }
        return Ok(closed);
    }
    Ok(p)
}

/// ∫_{−∞}^x P.
pub fn density_cdf(x: Real, model: &DensityModel, params: &ModularParams) -> Real {
    model
        .ab()
        .map(|(m, xi)| m * kernel_y_real(x - xi, params.eta))
        .sum()
}

/// Solves CDF_P(x) = target by bisection.
pub fn density_quantile(
    model: &DensityModel,
    target: Real,
    params: &ModularParams,
) -> Result<Real> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level {target} outside (0, 1)"
        )));
    }
    let f = |x: Real| density_cdf(x, model, params) - target;
    let (mut lo, mut hi) = model.window(params);
    let mut k = 0;
    while f(lo) > 0.0 || f(hi) < 0.0 {
        lo -= 10.0;
        hi += 10.0;
        k += 1;
        if k > 100 {
            return Err(Error::Convergence("quantile bracket not found".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn density_breaks(model: &DensityModel, params: &ModularParams, extra: &[Real]) -> Vec<Real> {
    let (lo, hi) = model.window(params);
    let mut b: Vec<Real> = vec![lo, hi];
    if model.a.kind == DensityKind::Atoms && model.b.kind == DensityKind::Atoms {
        b.extend(model.ab().map(|(_, x)| x));
    }
    for &e in extra {
        b.push(e);
    }
    let lo = b.iter().copied().fold(Real::INFINITY, Real::min);
    let hi = b.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    b.retain(|v| *v >= lo && *v <= hi);
    b.sort_by(Real::total_cmp);
    // Near-duplicates would leave panels too thin to integrate.
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + y.abs()));
    b
}

/// Moments of the ground-state density by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityMoments {
    #[serde(serialize_with = "ser_real")]
    pub mass: Real,
    #[serde(serialize_with = "ser_real")]
    pub mean: Real,
    #[serde(serialize_with = "ser_real")]
    pub second: Real,
}

pub fn ground_density_moments(
    model: &DensityModel,
    params: &ModularParams,
) -> Result<DensityMoments> {
    let breaks = density_breaks(model, params, &[0.0]);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-14,
        max_intervals: 20_000,
    };
    let eta = params.eta;
    let p = |x: Real| -> Real { model.ab().map(|(m, xi)| m * kernel_real(x - xi, eta)).sum() };
    let mass = integrate_real(p, &breaks, opts)?;
    let mean = integrate_real(|x| x * p(x), &breaks, opts)?;
    let second = integrate_real(|x| x * x * p(x), &breaks, opts)?;
    Ok(DensityMoments { mass, mean, second })
}

/// Number of strict local maxima of P on `n` equispaced points of [lo, hi].
pub fn ground_density_modes(
    model: &DensityModel,
    params: &ModularParams,
    lo: Real,
    hi: Real,
    n: usize,
) -> Result<usize> {
    let h = (hi - lo) / (n.max(2) - 1) as Real;
    let v = (0..n)
        .map(|k| ground_density(lo + k as Real * h, model, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(v.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count())
}

/// Max over the grid of |F[P](y)·2cosh(2πηy) − F[P_AB](y)|, with F[P]
/// computed by quadrature of P.
pub fn verify_primeq(
    model: &DensityModel,
    params: &ModularParams,
    y_grid: &[Real],
) -> Result<Real> {
    let breaks = density_breaks(model, params, &[0.0]);
    let eta = params.eta;
    let residuals = y_grid
        .par_iter()
        .map(|&y| {
            let f = |x: Real| -> Complex {
                let p: Real = model.ab().map(|(m, xi)| m * kernel_real(x - xi, eta)).sum();
                p * Complex::from_polar(1.0, -2.0 * PI * x * y)
            };
            let fp = integrate_breaks(f, &breaks, quad_opts())?.value;
            Ok((fp * 2.0 * (2.0 * PI * eta * y).cosh() - model.ab_fourier(y)).norm())
        })
        .collect::<Result<Vec<Real>>>()?;
    Ok(residuals.into_iter().fold(0.0, Real::max))
}

/// Integrates a fallible integrand, surfacing the first evaluation error.
fn integrate_fallible<F: Fn(Real) -> Result<Complex>>(f: F, breaks: &[Real]) -> Result<Complex> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let est = integrate_breaks(
        |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                c(0.0, 0.0)
            }
        },
        breaks,
        quad_opts(),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

/// The same integral computed against P and against P_AB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPair {
    /// ∫P(x₀) log φ(±(x − x₀) + iη) dx₀ by quadrature.
    #[serde(serialize_with = "ser_complex")]
    pub density_form: Complex,
    /// ∫P_AB(x₀) log φ₂(±(x − x₀) + iη) dx₀ as a sum over atoms.
    #[serde(serialize_with = "ser_complex")]
    pub atom_form: Complex,
    #[serde(serialize_with = "ser_real")]
    pub discrepancy: Real,
}

fn phi_atom_form(
    x: Real,
    sign: Real,
    model: &DensityModel,
    params: &ModularParams,
) -> Result<Complex> {
    let terms = model
        .ab()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(m, xi)| Ok(m * log_phi2(c(sign * (x - xi), params.eta), params)?))
        .collect::<Result<Vec<Complex>>>()?;
    Ok(terms.into_iter().sum())
}

fn phi_integral(
    x: Real,
    sign: Real,
    model: &DensityModel,
    params: &ModularParams,
) -> Result<PhiPair> {
    let eta = params.eta;
    let breaks = density_breaks(model, params, &[x]);
    let density_form = integrate_fallible(
        |s| {
            let p: Real = model.ab().map(|(m, xi)| m * kernel_real(s - xi, eta)).sum();
            Ok(p * log_phi(c(sign * (x - s), eta), params)?)
        },
        &breaks,
    )?;
    let atom_form = phi_atom_form(x, sign, model, params)?;
    Ok(PhiPair {
        density_form,
        atom_form,
        discrepancy: (density_form - atom_form).norm(),
    })
}

/// Φ₁(x) = ∫P(x₀) log φ(x − x₀ + iη) = ∫P_AB(x₀) log φ₂(x − x₀ + iη).
pub fn phi_integral_1(x: Real, model: &DensityModel, params: &ModularParams) -> Result<PhiPair> {
    phi_integral(x, 1.0, model, params)
}

/// Φ₂(x) = ∫P(x₀) log φ(x₀ − x + iη) = ∫P_AB(x₀) log φ₂(x₀ − x + iη).
pub fn phi_integral_2(x: Real, model: &DensityModel, params: &ModularParams) -> Result<PhiPair> {
    phi_integral(x, -1.0, model, params)
}

/// Branch of the transfer-matrix density: ℝ+i0 pairs with I₊.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> Real {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// I₊(x) = log[(−qu; q⁴)∞ (−iw; −ip)∞ / ((−q³u; q⁴)∞ (iw; −ip)∞)] and
/// I₋ = I₊ − 2πi y(x).
///
/// Each factor is continued along the horizontal line through x from
/// Re x = −∞. Valid for |Im x| ≤ 2η.
pub fn closed_form_i(x: Complex, branch: Branch, params: &ModularParams) -> Result<Complex> {
    if x.im.abs() > 2.0 * params.eta * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "closed form of I is continued only for |Im x| <= 2 eta, got {}",
            x.im
        )));
    }
    let side = if x.im > 0.0 { Side::Below } else { Side::Above };
    let lam_q = 2.0 * PI * params.b;
    let lam_w = c(PI / (2.0 * params.eta), 0.0);
    let base_q = I * PI + lam_q * I * x.im;
    let base_w = I * PI + lam_w * I * x.im;
    let ln_p = -PI * params.sigma / (2.0 * params.eta);
    let mut sum = c(0.0, 0.0);
    let mut converged = false;
    for n in 0..MAX_TERMS {
        let nf = n as Real;
        let k1 = base_q + params.log_q * (4.0 * nf + 1.0);
        let k2 = base_q + params.log_q * (4.0 * nf + 3.0);
        let kw = base_w + c(nf * ln_p, -PI * nf / 2.0);
        let k3 = kw + I * PI / 2.0;
        let k4 = kw - I * PI / 2.0;
        let mag_q = (k1.re + lam_q.re * x.re).exp();
        let mag_w = (kw.re + lam_w.re * x.re).exp();
        if mag_q < PRODUCT_CUTOFF && mag_w < PRODUCT_CUTOFF {
            converged = true;
            break;
        }
        sum += log_one_minus_exp(k1, lam_q, x.re, side) - log_one_minus_exp(k2, lam_q, x.re, side)
            + log_one_minus_exp(k3, lam_w, x.re, side)
            - log_one_minus_exp(k4, lam_w, x.re, side);
    }
    if !converged || !sum.re.is_finite() || !sum.im.is_finite() {
        return Err(Error::Convergence(format!("closed form of I at x = {x}")));
    }
    Ok(match branch {
        Branch::Plus => sum,
        Branch::Minus => sum - 2.0 * PI * I * kernel_y(x, params),
    })
}

/// Σ_AB m I±(x − ξ) from the closed form.
pub fn log_t0_closed(
    x: Real,
    model: &DensityModel,
    branch: Branch,
    params: &ModularParams,
) -> Result<Complex> {
    model
        .ab()
        .map(|(m, xi)| Ok(m * closed_form_i(c(x - xi, 0.0), branch, params)?))
        .sum()
}

/// ∫_{ℝ±i0} P(x₀) log(1 − e^{2πb(x−x₀)}) dx₀ by direct quadrature: the
/// principal log for x₀ > x, and 2πb(x−x₀) ± iπ + log(1 − e^{−2πb(x−x₀)})
/// below the logarithmic singularity.
pub fn log_t0_direct(
    x: Real,
    model: &DensityModel,
    branch: Branch,
    params: &ModularParams,
) -> Result<Complex> {
    let eta = params.eta;
    let lam = 2.0 * PI * params.b;
    let jump = branch.sign() * PI * I;
    let breaks = density_breaks(model, params, &[x]);
    integrate_fallible(
        |s| {
            let p: Real = model.ab().map(|(m, xi)| m * kernel_real(s - xi, eta)).sum();
            let v = (lam * (x - s)).exp();
            let g = if s > x {
                (1.0 - v).ln()
            } else {
                lam * (x - s) + jump + (1.0 - 1.0 / v).ln()
            };
            Ok(p * g)
        },
        &breaks,
    )
}

/// (1/N) log T₀(u) in density form, checked against direct quadrature.
pub fn log_t0_density(
    x: Real,
    model: &DensityModel,
    branch: Branch,
    params: &ModularParams,
) -> Result<Complex> {
    let closed = log_t0_closed(x, model, branch, params)?;
    let direct = log_t0_direct(x, model, branch, params)?;
    let gap = (closed - direct).norm();
    if gap > BRANCH_TOL {
        return Err(Error::Branch(format!(
            "closed form and direct quadrature of log T0 differ by {gap:.3e} at x = {x}"
        )));
    }
    Ok(closed)
}

/// Left-hand sides of the negativity condition and its 2iη companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaNegativity {
    /// ∫P_AB(x₀) log tanh|π(x − x₀ − σ)/4η| dx₀.
    #[serde(serialize_with = "ser_real")]
    pub value: Real,
    /// The same quantity as log|A(q²u)B(u)/(T₀(u)T₀(q²u))| from I±.
    #[serde(serialize_with = "ser_real")]
    pub via_transfer: Real,
    /// log|A(q²u)B(u)/(T₀(u)T₀(u)|_{x→x+2iη})|, which vanishes.
    #[serde(serialize_with = "ser_real")]
    pub shift_residual: Real,
}

pub fn delta_negativity(
    x: Real,
    model: &DensityModel,
    params: &ModularParams,
) -> Result<DeltaNegativity> {
    let eta = params.eta;
    let sigma = params.sigma;
    let mut value = 0.0;
    let mut via_transfer = 0.0;
    let mut shift_residual = 0.0;
    for (m, xi) in model.ab() {
        let s = x - xi;
        value += m * (PI * (s - sigma) / (4.0 * eta)).abs().tanh().ln();
        let ab = (1.0 + params.q * params.u(c(s, 0.0))).norm().ln();
        let t0 = closed_form_i(c(s, 0.0), Branch::Plus, params)?.re;
        let t0_q2 = closed_form_i(c(s - sigma, eta), Branch::Minus, params)?.re;
        let t0_shift = closed_form_i(c(s, 2.0 * eta), Branch::Plus, params)?.re;
        via_transfer += m * (ab - t0 - t0_q2);
        shift_residual += m * (ab - t0 - t0_shift);
    }
    Ok(DeltaNegativity {
        value,
        via_transfer,
        shift_residual,
    })
}

/// (1/N) log(Q₁/Q₂) in density form at each probe point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaeIdentity {
    pub x: Vec<Real>,
    pub values: Vec<Complex>,
    /// max |value_i − value_j|.
    #[serde(serialize_with = "ser_real")]
    pub spread: Real,
    /// iπ(S_B − S_A)/2.
    #[serde(serialize_with = "ser_complex")]
    pub expected: Complex,
    /// max |value − expected|.
    #[serde(serialize_with = "ser_real")]
    pub deviation: Real,
}

/// −2πi(μ+iη)x + Φ₁(x) − Φ₂(x) − ∫P_A log φ(x−x₀) + ∫P_B log φ(x₀−x).
pub fn bae_integral_value(
    x: Real,
    model: &DensityModel,
    params: &ModularParams,
) -> Result<Complex> {
    let phi1 = phi_atom_form(x, 1.0, model, params)?;
    let phi2 = phi_atom_form(x, -1.0, model, params)?;
    let mut v = -2.0 * PI * I * c(model.mu, params.eta) * x + phi1 - phi2;
    for (m, xi) in model.a.iter() {
        v -= m * log_phi(c(x - xi, 0.0), params)?;
    }
    for (m, xi) in model.b.iter() {
        v += m * log_phi(c(xi - x, 0.0), params)?;
    }
    Ok(v)
}

pub fn bae_integral_identity(
    xs: &[Real],
    model: &DensityModel,
    params: &ModularParams,
) -> Result<BaeIdentity> {
    let values = xs
        .iter()
        .map(|&x| bae_integral_value(x, model, params))
        .collect::<Result<Vec<_>>>()?;
    let mut spread: Real = 0.0;
    for a in &values {
        for b in &values {
            spread = spread.max((a - b).norm());
        }
    }
    let expected = I * PI * (model.s_b - model.s_a) / 2.0;
    let deviation = values
        .iter()
        .map(|v| (v - expected).norm())
        .fold(0.0, Real::max);
    Ok(BaeIdentity {
        x: xs.to_vec(),
        values,
        spread,
        expected,
        deviation,
    })
}

/// A function that can be tabulated on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFn {
    P,
    Phi1,
    Phi2,
    IPlus,
    IMinus,
    Delta,
}

impl ProfileFn {
    pub const ALL: [ProfileFn; 6] = [
        ProfileFn::P,
        ProfileFn::Phi1,
        ProfileFn::Phi2,
        ProfileFn::IPlus,
        ProfileFn::IMinus,
        ProfileFn::Delta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileFn::P => "P",
            ProfileFn::Phi1 => "Phi1",
            ProfileFn::Phi2 => "Phi2",
            ProfileFn::IPlus => "I_plus",
            ProfileFn::IMinus => "I_minus",
            ProfileFn::Delta => "delta",
        }
    }

    pub fn eval(self, x: Real, model: &DensityModel, params: &ModularParams) -> Result<Complex> {
        match self {
            ProfileFn::P => Ok(c(ground_density(x, model, params)?, 0.0)),
            ProfileFn::Phi1 => phi_atom_form(x, 1.0, model, params),
            ProfileFn::Phi2 => phi_atom_form(x, -1.0, model, params),
            ProfileFn::IPlus => log_t0_density(x, model, Branch::Plus, params),
            ProfileFn::IMinus => log_t0_density(x, model, Branch::Minus, params),
            ProfileFn::Delta => Ok(c(delta_negativity(x, model, params)?.value, 0.0)),
        }
    }
}

/// Tabulated functions, one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub functions: Vec<ProfileFn>,
    pub x: Vec<Real>,
    pub values: Vec<Vec<Complex>>,
}

impl Profile {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("x");
        for f in &self.functions {
            h.push_str(&format!(",{0}_re,{0}_im", f.name()));
        }
        h
    }

    /// Header row plus one row per grid point, 12 significant digits,
    /// LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for (x, row) in self.x.iter().zip(&self.values) {
            out.push_str(&g12(*x));
            for v in row {
                out.push(',');
                out.push_str(&g12(v.re));
                out.push(',');
                out.push_str(&g12(v.im));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p4() -> ModularParams {
        ModularParams::new(PI / 4.0).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = p4();
        assert!((kernel_k(c(0.0, 0.0), &p).unwrap().re - 1.0 / (4.0 * p.eta)).abs() < 1e-15);
        assert!((kernel_k(c(0.0, 0.0), &p).unwrap().re - 0.353_553_390_593_273_8).abs() < 1e-12);
        for x in [0.3, -1.2, 2.0] {
            let s = kernel_k(c(x, p.eta), &p).unwrap() + kernel_k(c(x, -p.eta), &p).unwrap();
            assert!(s.norm() < 1e-14);
        }
        assert!(matches!(kernel_k(c(0.0, p.eta), &p), Err(Error::Pole(_))));
        assert!(matches!(
            kernel_k(c(0.0, -3.0 * p.eta), &p),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn kernel_fourier_by_quadrature() {
        let p = p4();
        let y = 0.3;
        let f = |x: Real| kernel_real(x, p.eta) * (2.0 * PI * x * y).cos();
        let v = integrate_real(f, &[-40.0, 0.0, 40.0], quad_opts()).unwrap();
        assert!((v - kernel_fourier(y, &p)).abs() < 1e-8);
    }

    #[test]
    fn y_is_antiderivative_of_k() {
        let p = p4();
        let h = 1e-5;
        for x in [0.0, 0.5] {
            let d = (kernel_y(c(x + h, 0.0), &p) - kernel_y(c(x - h, 0.0), &p)) / (2.0 * h);
            assert!((d.re - kernel_real(x, p.eta)).abs() < 1e-7);
            assert!(d.im.abs() < 1e-7);
            assert!((kernel_y(c(x, 0.0), &p).re - kernel_y_real(x, p.eta)).abs() < 1e-14);
        }
        assert!(kernel_y_real(-60.0, p.eta) < 1e-30);
        assert!((kernel_y_real(60.0, p.eta) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn minus_ip_matches_dual_exponential() {
        let p = p4();
        let lhs = -I * kernel_p(&p);
        let rhs = (-I * PI / (p.b * 2.0 * p.eta)).exp();
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn density_constructors() {
        let d = Density::atoms(&[(0.25, 1.0), (0.75, -1.0)]).unwrap();
        assert!((d.mean() + 0.5).abs() < 1e-15);
        assert!((d.second_moment() - 1.0).abs() < 1e-15);
        assert!(Density::atoms(&[(0.5, 1.0)]).is_err());
        assert!(Density::atoms(&[(1.5, 1.0), (-0.5, 0.0)]).is_err());
        let g = Density::gaussian(0.3, 0.2).unwrap();
        assert!((g.total() - 1.0).abs() < 1e-13);
        assert!((g.mean() - 0.3).abs() < 1e-13);
        assert!((g.second_moment() - 0.13).abs() < 1e-13);
        assert!(Density::gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn model_flags_and_validation() {
        let m = DensityModel::homogeneous(0.1);
        assert!(m.symmetric && m.homogeneous);
        let m = DensityModel::new(
            Density::atoms_uniform(&[0.4, -0.2]),
            Density::atoms_uniform(&[0.2, -0.4]),
        )
        .unwrap();
        assert!(m.symmetric && !m.homogeneous);
        let bad = DensityModel::new(Density::single(0.1), Density::single(0.1));
        assert!(matches!(bad, Err(Error::Validation(_))));
    }

    #[test]
    fn closed_form_density_and_moments() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        let v = ground_density(0.0, &m, &p).unwrap();
        assert!((v - 2.0 * kernel_real(0.1, p.eta)).abs() < 1e-14);
        let mo = ground_density_moments(&m, &p).unwrap();
        assert!((mo.mass - 1.0).abs() < 1e-9);
        assert!(mo.mean.abs() < 1e-12);
        assert!((mo.second - (p.eta * p.eta + 0.01)).abs() < 1e-8);
    }

    #[test]
    fn quantiles_invert_cdf() {
        let p = p4();
        let m = DensityModel::homogeneous(0.2);
        let x = density_quantile(&m, 0.5, &p).unwrap();
        assert!(x.abs() < 1e-12);
        let x = density_quantile(&m, 0.8, &p).unwrap();
        assert!((density_cdf(x, &m, &p) - 0.8).abs() < 1e-12);
        assert!(density_quantile(&m, 1.0, &p).is_err());
    }

    #[test]
    fn primeq_atoms() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        let ys: Vec<Real> = (0..=8).map(|k| -2.0 + 0.5 * k as Real).collect();
        assert!(verify_primeq(&m, &p, &ys).unwrap() < 1e-8);
    }

    #[test]
    fn i_plus_minus_jump() {
        let p = p4();
        for x in [-1.0, 0.4, 1.6] {
            let ip = closed_form_i(c(x, 0.0), Branch::Plus, &p).unwrap();
            let im = closed_form_i(c(x, 0.0), Branch::Minus, &p).unwrap();
            let y = kernel_y_real(x, p.eta);
            assert!((ip - im - 2.0 * PI * I * y).norm() < 1e-12);
        }
    }

    #[test]
    fn log_t0_routes_agree() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        for br in [Branch::Plus, Branch::Minus] {
            let v = log_t0_density(0.4, &m, br, &p).unwrap();
            let d = log_t0_direct(0.4, &m, br, &p).unwrap();
            assert!((v - d).norm() < 1e-7, "{br:?} {v} {d}");
        }
    }

    #[test]
    fn delta_checks() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        let d = delta_negativity(0.0, &m, &p).unwrap();
        assert!(d.value < 0.0);
        assert!((d.value - d.via_transfer).abs() < 1e-10, "{d:?}");
        let d = delta_negativity(0.3, &m, &p).unwrap();
        assert!(d.shift_residual.abs() < 1e-10);
    }

    #[test]
    fn phi_pairs() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        let r = phi_integral_1(0.2, &m, &p).unwrap();
        assert!(r.discrepancy < 1e-6, "{r:?}");
        let r2 = phi_integral_2(-0.2, &m, &p).unwrap();
        assert!((r2.atom_form - r.atom_form).norm() < 1e-8);
        let z = DensityModel::homogeneous(0.0);
        let r = phi_integral_1(0.3, &z, &p).unwrap();
        let two = 2.0 * log_phi2(c(0.3, p.eta), &p).unwrap();
        assert!((r.atom_form - two).norm() < 1e-14);
    }

    #[test]
    fn bae_identity_homogeneous() {
        let p = p4();
        let m = DensityModel::homogeneous(0.1);
        let r = bae_integral_identity(&[-0.5, 0.0, 0.7], &m, &p).unwrap();
        assert!(r.spread < 1e-6, "{r:?}");
        assert!(r.deviation < 1e-6, "{r:?}");
    }

    #[test]
    fn grid_and_csv() {
        let g = Grid::new(-3.0, 3.0, 0.1).unwrap();
        assert_eq!(g.points().len(), 61);
        assert!(Grid::new(1.0, 0.0, 0.1).is_err());
        let ctx = ThermoContext::new(
            p4(),
            DensityModel::homogeneous(0.1),
            Grid::new(0.0, 0.2, 0.1).unwrap(),
        );
        let prof = ctx.profile(&[ProfileFn::P, ProfileFn::Delta]).unwrap();
        let csv = prof.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("x,P_re,P_im,delta_re,delta_im\n"));
    }
}
