//! Adaptive Gauss–Kronrod quadrature for complex-valued integrands of a
//! real variable, and Gauss–Legendre rules.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Complex, Error, Real, Result};

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: Real,
    pub rel_tol: Real,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex,
    pub error: Real,
}

fn gk15<F: Fn(Real) -> Complex>(f: &F, a: Real, b: Real) -> (Complex, Real) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    (value, err)
}

struct Segment {
    a: Real,
    b: Real,
    value: Complex,
    error: Real,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst segment until the
/// summed error estimate meets the tolerance.
pub fn integrate<F: Fn(Real) -> Complex>(
    f: F,
    a: Real,
    b: Real,
    opts: QuadOptions,
) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], opts)
}

/// As [`integrate`], with the interval pre-split at the given ordered
/// breakpoints (integrable endpoint singularities belong there).
pub fn integrate_breaks<F: Fn(Real) -> Complex>(
    f: F,
    breaks: &[Real],
    opts: QuadOptions,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let mut total = Complex::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = gk15(&f, a, b);
        total += value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }
    let mut count = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Convergence("non-finite integrand".into()));
        }
        if count >= opts.max_intervals {
            return Err(Error::Convergence(format!(
                "error estimate {total_err:.3e} above tolerance {tol:.3e} after {count} intervals"
            )));
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in double precision.
            heap.push(Segment { error: 0.0, ..seg });
            total_err -= seg.error;
            continue;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        count += 1;
    }
    // Re-sum to shed accumulated rounding from the incremental updates.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segs
        .iter()
        .fold(Complex::new(0.0, 0.0), |acc, s| acc + s.value);
    let error = segs.iter().map(|s| s.error).sum();
    Ok(Estimate { value, error })
}

/// Real-valued convenience wrapper around [`integrate_breaks`].
pub fn integrate_real<F: Fn(Real) -> Real>(
    f: F,
    breaks: &[Real],
    opts: QuadOptions,
) -> Result<Real> {
    integrate_breaks(|x| Complex::new(f(x), 0.0), breaks, opts).map(|e| e.value.re)
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: Real, b: Real) -> (Vec<Real>, Vec<Real>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(
            |x| Complex::new(x * x * x - 2.0 * x, x * x),
            -1.0,
            2.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((est.value - Complex::new(0.75, 3.0)).norm() < 1e-14);
    }

    #[test]
    fn endpoint_log_singularity() {
        let v = integrate_real(|x| x.ln(), &[0.0, 1.0], QuadOptions::default()).unwrap();
        assert!((v + 1.0).abs() < 1e-11);
    }

    #[test]
    fn oscillatory_gaussian() {
        // ∫ e^{-x²} cos(3x) dx = √π e^{-9/4}
        let v = integrate_real(
            |x| (-x * x).exp() * (3.0 * x).cos(),
            &[-12.0, 0.0, 12.0],
            QuadOptions::default(),
        )
        .unwrap();
        let exact = std::f64::consts::PI.sqrt() * (-2.25f64).exp();
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8, 0.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let r = integrate(|x| Complex::new(1.0 / x.sqrt(), 0.0), 0.0, 1.0, opts);
        assert!(matches!(r, Err(Error::Convergence(_))));
    }
}
