//! Chain parameters and their validation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::modular::ModularParams;
use crate::poly::{model_polys, ModelPolys};
use crate::{c, Complex, Error, Real, Result};

/// Tolerance on the centring constraints of α and β.
pub const CENTERING_TOL: Real = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiMode {
    /// ξ is read off as the common value of the quantisation ratios.
    Free,
    /// Symmetric chains: ξ is the parity of the state, ±1.
    Parity,
}

/// Inhomogeneities α_ν, β_ν, the spectral parameter τ and the derived
/// centre μ = mean(α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub alpha: Vec<Real>,
    pub beta: Vec<Real>,
    pub tau: Real,
    pub mu: Real,
    pub xi_mode: XiMode,
}

impl ModelSpec {
    /// Validates and builds a spec; μ is taken as the mean of α.
    pub fn new(alpha: Vec<Real>, beta: Vec<Real>, tau: Real, xi_mode: XiMode) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(Error::Validation(
                "chain length N must be at least 1".into(),
            ));
        }
        if beta.len() != n {
            return Err(Error::Validation(format!(
                "alpha has {n} entries but beta has {}",
                beta.len()
            )));
        }
        if alpha
            .iter()
            .chain(&beta)
            .chain([&tau])
            .any(|v| !v.is_finite())
        {
            return Err(Error::Validation("non-finite model parameter".into()));
        }
        let mu = alpha.iter().sum::<Real>() / n as Real;
        let spec = Self {
            alpha,
            beta,
            tau,
            mu,
            xi_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Homogeneous chain: α_ν = μ, β_ν = −μ.
    pub fn homogeneous(n: usize, mu: Real, tau: Real, xi_mode: XiMode) -> Result<Self> {
        Self::new(vec![mu; n], vec![-mu; n], tau, xi_mode)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n() as Real;
        let mean_b = self.beta.iter().sum::<Real>() / n;
        let scale = 1.0 + self.mu.abs();
        if (mean_b + self.mu).abs() > CENTERING_TOL * scale {
            return Err(Error::Validation(format!(
                "mean(beta) = {mean_b} must equal -mean(alpha) = {}",
                -self.mu
            )));
        }
        if !(self.tau < 0.0) {
            return Err(Error::Validation(format!(
                "tau = {} gives |t^2| >= 1; tau must be negative",
                self.tau
            )));
        }
        if self.xi_mode == XiMode::Parity && !self.is_symmetric() {
            return Err(Error::Validation(
                "parity mode needs beta = -alpha as multisets".into(),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// β = −α as multisets.
    pub fn is_symmetric(&self) -> bool {
        let mut a: Vec<Real> = self.alpha.iter().map(|x| -x).collect();
        let mut b = self.beta.clone();
        a.sort_by(Real::total_cmp);
        b.sort_by(Real::total_cmp);
        a.iter()
            .zip(&b)
            .all(|(x, y)| (x - y).abs() <= CENTERING_TOL)
    }

    /// |t²| = e^{4πτ cos θ}.
    pub fn t2_modulus(&self, params: &ModularParams) -> Real {
        (4.0 * PI * self.tau * params.eta).exp()
    }

    /// t = e^{2πbτ} in the frame `params` (t* in the starred frame).
    pub fn t(&self, params: &ModularParams) -> Complex {
        params.u(c(self.tau, 0.0))
    }

    pub fn a(&self, params: &ModularParams) -> Complex {
        params.u(c(self.mu, 0.0))
    }

    pub fn a_nu(&self, params: &ModularParams) -> Vec<Complex> {
        self.alpha.iter().map(|x| params.u(c(*x, 0.0))).collect()
    }

    pub fn b_nu(&self, params: &ModularParams) -> Vec<Complex> {
        self.beta.iter().map(|x| params.u(c(*x, 0.0))).collect()
    }

    /// τ′ = 2τ/N + μ + iη.
    pub fn tau_prime(&self, params: &ModularParams) -> Complex {
        c(2.0 * self.tau / self.n() as Real + self.mu, params.eta)
    }

    pub fn polys(&self, params: &ModularParams) -> ModelPolys {
        model_polys(&self.a_nu(params), &self.b_nu(params), params)
    }

    /// τ giving |t²| = `t2` at the given θ.
    pub fn tau_for_t2(t2: Real, params: &ModularParams) -> Real {
        t2.ln() / (4.0 * PI * params.eta)
    }
}
