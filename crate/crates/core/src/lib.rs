//! Finite-N spectral bootstrap and thermodynamic ground state of the
//! modular sinh-Gordon chain.
//!
//! The crate is layered bottom-up:
//!
//! | module | contents |
//! |--------|----------|
//! | [`modular`] | modular parameters, q-Pochhammer symbols, θ₁, the quantum dilogarithms φ and φ₂ |
//! | [`poly`], [`linalg`] | dense complex polynomials, q-products, the linear solver |
//! | [`model`] | validated chain parameters |
//! | [`bootstrap`] | t²-expansion of χ±, T(u) and the q-Wronskian |
//! | [`spectral`] | Q₁, Q₂, quantisation ratios and the Newton solver |
//! | [`thermo`] | ground-state density, kernel, free-energy integrals |
//! | [`selftest`] | the special-function identity suite |
//!
//! All scalars are IEEE doubles behind the [`Real`] and [`Complex`] aliases.

// `!(a < b)` guards are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod format;
pub mod linalg;
pub mod model;
pub mod modular;
pub mod poly;
pub mod quad;
pub mod selftest;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};

pub type Real = f64;
pub type Complex = num_complex::Complex64;

pub(crate) const I: Complex = Complex::new(0.0, 1.0);

pub(crate) fn c(re: Real, im: Real) -> Complex {
    Complex::new(re, im)
}

/// Wraps an angle into (−π, π].
pub(crate) fn wrap_angle(a: Real) -> Real {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
