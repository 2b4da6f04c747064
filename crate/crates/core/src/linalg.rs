//! Dense complex linear solves with an explicit residual.

use nalgebra::{DMatrix, DVector};

use crate::{Complex, Error, Real, Result};

/// Pivot ratio below which a system is declared singular. Bootstrap
/// systems are strongly graded (powers of q on the diagonal), so healthy
/// systems reach pivot ratios far below machine epsilon; accuracy is
/// guarded by the returned residual instead.
pub const SINGULAR_PIVOT_RATIO: Real = 1e-250;

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<Complex>,
    /// ‖M x − rhs‖∞
    pub residual: Real,
    /// max |U_ii| / min |U_ii| of the LU factor.
    pub condition: Real,
}

/// LU with partial pivoting.
pub fn linear_solve(m: &DMatrix<Complex>, rhs: &DVector<Complex>) -> Result<Solution> {
    let n = m.nrows();
    if m.ncols() != n || rhs.len() != n {
        return Err(Error::Domain(format!(
            "linear system is {}x{} with {} right-hand sides",
            n,
            m.ncols(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(Solution {
            x: DVector::zeros(0),
            residual: 0.0,
            condition: 1.0,
        });
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let pivots: Vec<Real> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let pmax = pivots.iter().copied().fold(0.0, Real::max);
    let pmin = pivots.iter().copied().fold(Real::INFINITY, Real::min);
    let condition = if pmin > 0.0 {
        pmax / pmin
    } else {
        Real::INFINITY
    };
    if !(pmin > SINGULAR_PIVOT_RATIO * pmax) || !pmax.is_finite() {
        return Err(Error::SingularSystem { condition });
    }
    let x = lu.solve(rhs).ok_or(Error::SingularSystem { condition })?;
    let residual = (m * &x - rhs).iter().map(|z| z.norm()).fold(0.0, Real::max);
    Ok(Solution {
        x,
        residual,
        condition,
    })
}
