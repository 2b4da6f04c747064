//! Q₁, Q₂, the quantisation ratios at the Bethe roots and the Newton
//! solver for the root configuration.
//!
//! Starred quantities f(u)* are evaluated in the dual frame at u*, which
//! for real data is complex conjugation and for complex x is its analytic
//! continuation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{BootstrapState, WDrift};
use crate::format::{ser_complex, ser_complex_vec, ser_real, ser_real_vec};
use crate::model::{ModelSpec, XiMode};
use crate::modular::{log_phi_principal, ModularParams};
use crate::thermo::{self, Density, DensityModel};
use crate::{c, wrap_angle, Complex, Error, Real, Result, I};

/// Distance in the x-plane below which an evaluation point counts as
/// sitting on a singularity.
pub const POLE_TOL: Real = 1e-8;

/// Offsets used by the numerical cross-check of the quantisation limit.
pub const LIMIT_EPSILONS: [Real; 2] = [1e-4, 1e-5];

/// Analytic and offset limits must agree to this before a ratio is
/// trusted.
pub const LIMIT_AGREEMENT: Real = 1e-6;

/// Primal and dual bootstrap states for one candidate root set.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    pub params: ModularParams,
    pub spec: ModelSpec,
    pub primal: BootstrapState,
    pub dual: BootstrapState,
}

impl SpectralContext {
    pub fn new(
        spec: &ModelSpec,
        roots: &[Real],
        order: usize,
        params: &ModularParams,
    ) -> Result<Self> {
        let (primal, dual) = rayon::join(
            || BootstrapState::run(spec, roots, order, params, false),
            || BootstrapState::run(spec, roots, order, params, true),
        );
        Ok(Self {
            params: *params,
            spec: spec.clone(),
            primal: primal?,
            dual: dual?,
        })
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn roots(&self) -> &[Real] {
        &self.primal.roots
    }

    fn u(&self, x: Complex) -> Complex {
        self.params.u(x)
    }

    fn ustar(&self, x: Complex) -> Complex {
        self.params.ustar(x)
    }

    /// Rejects points on the lattice x_ν + inb − imb⁻¹ of zeros of W*.
    fn check_lattice(&self, x: Complex) -> Result<()> {
        let b = self.params.b;
        for xr in self.roots() {
            for n in -4i32..=4 {
                for m in -4i32..=4 {
                    let z = c(*xr, 0.0) + I * b * n as Real - I * m as Real / b;
                    let d = (x - z).norm();
                    if d < POLE_TOL {
                        return Err(Error::NearPole {
                            x: format!("{x}"),
                            location: format!("{z}"),
                            distance: d,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn sum_log_phi(&self, args: impl Iterator<Item = Complex>, x: Complex) -> Result<Complex> {
        let mut s = c(0.0, 0.0);
        for a in args {
            s += log_phi_principal(a, &self.params).map_err(|_| Error::NearPole {
                x: format!("{x}"),
                location: format!("zero of phi at argument {a}"),
                distance: 0.0,
            })?;
        }
        Ok(s)
    }

    /// exp(−Σ log φ(x−α_ν)) · χ₊(u)χ₋(u)*/W(u)*.
    pub fn q1(&self, x: Complex) -> Result<Complex> {
        self.check_lattice(x)?;
        let lp = self.sum_log_phi(self.spec.alpha.iter().map(|a| x - a), x)?;
        let (u, us) = (self.u(x), self.ustar(x));
        Ok(
            (-lp).exp() * self.primal.chi_plus(u)? * self.dual.chi_minus(us)?
                / self.dual.wronskian(us)?,
        )
    }

    /// exp(2πiτ′xN − Σ log φ(β_ν−x)) · χ₋(u)χ₊(u)*/W(q²u)*.
    pub fn q2(&self, x: Complex) -> Result<Complex> {
        self.check_lattice(x)?;
        let lp = self.sum_log_phi(self.spec.beta.iter().map(|b| b - x), x)?;
        let n = self.n() as Real;
        let tp = self.spec.tau_prime(&self.params);
        let (u, us) = (self.u(x), self.ustar(x));
        let pre = (2.0 * PI * I * tp * x * n - lp).exp();
        Ok(pre * self.primal.chi_minus(u)? * self.dual.chi_plus(us)?
            / self.dual.wronskian(self.dual.params.q2() * us)?)
    }

    pub fn q(&self, x: Complex, xi: Complex) -> Result<Complex> {
        Ok(self.q1(x)? - xi * self.q2(x)?)
    }

    /// Q₁/Q₂ with the vanishing Wronskians divided out analytically:
    /// W*(q*²u*)/W*(u*) = (−u*)^{−N} by the quasi-periodicity of W*.
    pub fn ratio_analytic(&self, x: Complex) -> Result<Complex> {
        let n = self.n() as i32;
        let tp = self.spec.tau_prime(&self.params);
        let num = self.sum_log_phi(self.spec.beta.iter().map(|b| b - x), x)?;
        let den = self.sum_log_phi(self.spec.alpha.iter().map(|a| x - a), x)?;
        let (u, us) = (self.u(x), self.ustar(x));
        let chis = self.primal.chi_plus(u)? * self.dual.chi_minus(us)?
            / (self.primal.chi_minus(u)? * self.dual.chi_plus(us)?);
        Ok((num - den - 2.0 * PI * I * tp * x * self.n() as Real).exp() * chis * (-us).powi(-n))
    }

    /// Q₁/Q₂ evaluated directly (both Wronskians present).
    pub fn ratio_direct(&self, x: Complex) -> Result<Complex> {
        Ok(self.q1(x)? / self.q2(x)?)
    }

    /// The limit of Q₁/Q₂ at x_γ by symmetric offsets ±ε with one
    /// Richardson step.
    pub fn ratio_offset(&self, gamma: usize, eps: Real) -> Result<Complex> {
        let x = c(self.roots()[gamma], 0.0);
        let sym = |e: Real| -> Result<Complex> {
            Ok(0.5 * (self.ratio_direct(x + e)? + self.ratio_direct(x - e)?))
        };
        Ok((4.0 * sym(0.5 * eps)? - sym(eps)?) / 3.0)
    }

    /// lim_{x→x_γ} Q₁/Q₂, analytic route, cross-checked by the offset
    /// route at every ε in [`LIMIT_EPSILONS`].
    pub fn bae_ratio(&self, gamma: usize) -> Result<Complex> {
        let analytic = self.bae_ratio_unchecked(gamma)?;
        for eps in LIMIT_EPSILONS {
            let off = self.ratio_offset(gamma, eps)?;
            let d = (off - analytic).norm();
            if !(d <= LIMIT_AGREEMENT) {
                return Err(Error::LimitMismatch {
                    index: gamma,
                    discrepancy: d,
                });
            }
        }
        Ok(analytic)
    }

    /// The analytic limit with only the simple-zero check.
    pub fn bae_ratio_unchecked(&self, gamma: usize) -> Result<Complex> {
        let xg = self.roots()[gamma];
        let h = 1e-6;
        let w = |x: Real| self.dual.wronskian(self.ustar(c(x, 0.0)));
        let slope = (w(xg + h)? - w(xg - h)?).norm() / (2.0 * h);
        let scale = self
            .dual
            .theta_product(self.ustar(c(xg + 0.25, 0.0)))?
            .norm();
        if !(slope > 1e-8 * scale.max(1e-300)) {
            return Err(Error::DegenerateRoot { index: gamma });
        }
        self.ratio_analytic(c(xg, 0.0))
    }

    /// The parity combination of a symmetric chain,
    /// e^{−2πiτ′xN} ∏φ(−α_ν−x)/φ(x−α_ν) · χ₊(u)χ₊(1/u)*/(χ₊(1/u)χ₊(u)*)
    /// · (−u*)^{−N}; the last factor is the Wronskian ratio at the root.
    pub fn parity_lhs(&self, x: Real) -> Result<Complex> {
        if !self.spec.is_symmetric() {
            return Err(Error::Validation("parity needs a symmetric chain".into()));
        }
        let x = c(x, 0.0);
        let n = self.n() as i32;
        let tp = self.spec.tau_prime(&self.params);
        let num = self.sum_log_phi(self.spec.alpha.iter().map(|a| -a - x), x)?;
        let den = self.sum_log_phi(self.spec.alpha.iter().map(|a| x - a), x)?;
        let (u, us) = (self.u(x), self.ustar(x));
        let chis = self.primal.chi_plus(u)? * self.dual.chi_plus(1.0 / us)?
            / (self.primal.chi_plus(1.0 / u)? * self.dual.chi_plus(us)?);
        Ok((num - den - 2.0 * PI * I * tp * x * self.n() as Real).exp() * chis * (-us).powi(-n))
    }

    /// Residuals of both TQ equations at x for Q = Q₁ − ξQ₂, each divided
    /// by the largest of its three terms.
    pub fn tq_residuals(&self, x: Complex, xi: Complex) -> Result<[Real; 2]> {
        let p = &self.params;
        let b = p.b;
        let (u, us) = (self.u(x), self.ustar(x));
        let t = self.primal.t;
        let ts = self.dual.t;
        let q = |z: Complex| self.q(z, xi);
        let q0 = q(x)?;

        let pa = &self.primal.polys;
        let big_t = self.primal.t_transfer(u) / t;
        let terms1 = [
            pa.a.eval(u) / t * q(x - I * b)?,
            t * pa.b.eval(u) * q(x + I * b)?,
            -big_t * q0,
        ];
        let da = &self.dual.polys;
        let qs2 = self.dual.params.q2();
        let big_ts = self.dual.t_transfer(us) / ts;
        let terms2 = [
            da.a.eval(qs2 * us) / ts * q(x - I / b)?,
            ts * da.b.eval(us / qs2) * q(x + I / b)?,
            -big_ts * q0,
        ];
        let rel = |t: [Complex; 3]| {
            let s = t[0] + t[1] + t[2];
            let m = t.iter().map(|z| z.norm()).fold(0.0, Real::max);
            s.norm() / m.max(1e-300)
        };
        Ok([rel(terms1), rel(terms2)])
    }
}

/// Newton-solver settings.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: Real,
    pub jacobian_step: Real,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

/// A solved root configuration.
#[derive(Debug, Clone, Serialize)]
pub struct BetheState {
    #[serde(serialize_with = "ser_real_vec")]
    pub roots: Vec<Real>,
    #[serde(serialize_with = "ser_complex")]
    pub xi: Complex,
    #[serde(serialize_with = "ser_complex_vec")]
    pub ratios: Vec<Complex>,
    #[serde(serialize_with = "ser_complex")]
    pub rho: Complex,
    #[serde(serialize_with = "ser_real")]
    pub residual: Real,
    #[serde(serialize_with = "ser_real")]
    pub lattice_residual: Real,
    pub iterations: usize,
    pub order: usize,
    pub drift: WDrift,
}

fn complete_roots(free: &[Real]) -> Vec<Real> {
    let mut r = free.to_vec();
    r.push(-free.iter().sum::<Real>());
    r
}

/// arg(R_γ/R_N), γ = 1..N−1.
fn residual_vector(ctx: &SpectralContext) -> Result<Vec<Real>> {
    let n = ctx.n();
    let last = ctx.bae_ratio_unchecked(n - 1)?;
    (0..n - 1)
        .map(|g| Ok((ctx.bae_ratio_unchecked(g)? / last).arg()))
        .collect()
}

fn max_abs(v: &[Real]) -> Real {
    v.iter().map(|x| x.abs()).fold(0.0, Real::max)
}

/// Solves the quantisation conditions for x₁..x_{N−1} (x_N = −Σ) by
/// Newton iteration with a central-difference Jacobian.
pub fn solve_bae(
    spec: &ModelSpec,
    seed: &[Real],
    order: usize,
    params: &ModularParams,
    opts: &SolverOptions,
) -> Result<BetheState> {
    let n = spec.n();
    if seed.len() != n {
        return Err(Error::Validation(format!(
            "{} seed roots for a chain of length {n}",
            seed.len()
        )));
    }
    let shift = seed.iter().sum::<Real>() / n as Real;
    let mut free: Vec<Real> = seed[..n - 1].iter().map(|x| x - shift).collect();
    let build = |free: &[Real]| SpectralContext::new(spec, &complete_roots(free), order, params);

    let mut ctx = build(&free)?;
    let mut g = residual_vector(&ctx)?;
    let mut iterations = 0;
    while max_abs(&g) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: max_abs(&g),
            });
        }
        iterations += 1;
        let h = opts.jacobian_step;
        let columns: Vec<Result<Vec<Real>>> = (0..n - 1)
            .into_par_iter()
            .map(|k| {
                let mut plus = free.clone();
                let mut minus = free.clone();
                plus[k] += h;
                minus[k] -= h;
                let gp = residual_vector(&build(&plus)?)?;
                let gm = residual_vector(&build(&minus)?)?;
                Ok(gp
                    .iter()
                    .zip(&gm)
                    .map(|(a, b)| wrap_angle(a - b) / (2.0 * h))
                    .collect())
            })
            .collect();
        let mut jac = nalgebra::DMatrix::<Real>::zeros(n - 1, n - 1);
        for (k, col) in columns.into_iter().enumerate() {
            for (i, v) in col?.into_iter().enumerate() {
                jac[(i, k)] = v;
            }
        }
        let rhs = nalgebra::DVector::from_vec(g.clone());
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularSystem {
            condition: Real::INFINITY,
        })?;

        // Backtracking keeps the iteration inside the basin of the seed.
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Real> = free
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x - lambda * d)
                .collect();
            let attempt = build(&trial).and_then(|c| {
                let gt = residual_vector(&c)?;
                Ok((c, gt))
            });
            match attempt {
                Ok((c, gt)) if max_abs(&gt) < max_abs(&g) || lambda < 1e-3 => {
                    free = trial;
                    ctx = c;
                    // Unwind 2π jumps relative to the previous residual.
                    g = gt
                        .iter()
                        .zip(&g)
                        .map(|(a, b)| b + wrap_angle(a - b))
                        .map(wrap_angle)
                        .collect();
                    break;
                }
                _ if lambda >= 1e-3 => lambda *= 0.5,
                Ok(_) => unreachable!(),
                Err(e) => return Err(e),
            }
        }
    }

    let ratios: Vec<Complex> = (0..n).map(|k| ctx.bae_ratio(k)).collect::<Result<_>>()?;
    let xi = ratios[n - 1];
    if spec.xi_mode == XiMode::Parity {
        let d = (xi - 1.0).norm().min((xi + 1.0).norm());
        if d > 1e-8 {
            return Err(Error::Validation(format!(
                "parity mode expected xi = +-1, found {xi}"
            )));
        }
    }
    let residual = ratios
        .iter()
        .map(|r| (r / xi).arg().abs())
        .fold(0.0, Real::max);
    let lattice_residual = lattice_check(&ctx, xi)?;
    let drift = ctx.primal.w_root_drift()?;
    Ok(BetheState {
        roots: ctx.roots().to_vec(),
        xi,
        ratios,
        rho: drift.rho,
        residual,
        lattice_residual,
        iterations,
        order,
        drift,
    })
}

/// max_γ |R(x_γ + ib − ib⁻¹) − ξ|; the shifted point is x_γ − 2σ for real
/// data.
pub fn lattice_check(ctx: &SpectralContext, xi: Complex) -> Result<Real> {
    let b = ctx.params.b;
    let mut worst: Real = 0.0;
    for &x in ctx.roots() {
        let shifted = c(x, 0.0) + I * b - I / b;
        worst = worst.max((ctx.ratio_analytic(shifted)? - xi).norm());
    }
    Ok(worst)
}

/// Seeds from the quantiles of the thermodynamic ground-state density
/// of a homogeneous-equivalent chain: x_ν solves CDF_P(x) = (ν − ½)/N,
/// listed in descending order and recentred to Σx = 0.
pub fn quantile_seed(spec: &ModelSpec, params: &ModularParams) -> Result<Vec<Real>> {
    let model = DensityModel::new(
        Density::atoms_uniform(&spec.alpha),
        Density::atoms_uniform(&spec.beta),
    )?;
    let n = spec.n();
    let mut seeds = Vec::with_capacity(n);
    for k in 0..n {
        let target = 1.0 - (k as Real + 0.5) / n as Real;
        seeds.push(thermo::density_quantile(&model, target, params)?);
    }
    let mean = seeds.iter().sum::<Real>() / n as Real;
    Ok(seeds.into_iter().map(|x| x - mean).collect())
}

/// Pairs ν ↔ N+1−ν under descending order; returns max |x_ν + x_{N+1−ν}|.
pub fn pairing_defect(roots: &[Real]) -> Real {
    let mut r = roots.to_vec();
    r.sort_by(|a, b| b.total_cmp(a));
    let n = r.len();
    (0..n)
        .map(|k| (r[k] + r[n - 1 - k]).abs())
        .fold(0.0, Real::max)
}
