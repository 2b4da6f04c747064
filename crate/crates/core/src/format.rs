//! Fixed-precision number formatting shared by the JSON and CSV writers.

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::{Complex, Real};

/// Significant digits used in every emitted float.
pub const SIG_DIGITS: usize = 12;

/// C `%.{sig}g`: shortest of fixed/scientific, trailing zeros removed.
pub fn fmt_g(x: Real, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// [`fmt_g`] at [`SIG_DIGITS`].
pub fn g12(x: Real) -> String {
    fmt_g(x, SIG_DIGITS)
}

/// Rounds through the 12-digit text form, so serialized values and any
/// later re-parsing agree exactly.
pub fn round12(x: Real) -> Real {
    g12(x).parse().unwrap_or(x)
}

/// Serializes a real rounded to 12 significant digits.
pub fn ser_real<S: Serializer>(x: &Real, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round12(*x))
}

/// Serializes a complex number as `[re, im]`, each rounded.
pub fn ser_complex<S: Serializer>(z: &Complex, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&round12(z.re))?;
    seq.serialize_element(&round12(z.im))?;
    seq.end()
}

/// Serializes a slice of complex numbers as nested pairs.
pub fn ser_complex_vec<S: Serializer>(v: &[Complex], s: S) -> Result<S::Ok, S::Error> {
    let pairs: Vec<[Real; 2]> = v.iter().map(|z| [round12(z.re), round12(z.im)]).collect();
    pairs.serialize(s)
}

/// Serializes a slice of reals, each rounded.
pub fn ser_real_vec<S: Serializer>(v: &[Real], s: S) -> Result<S::Ok, S::Error> {
    let r: Vec<Real> = v.iter().map(|x| round12(*x)).collect();
    r.serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_g(0.0, 12), "0");
        assert_eq!(fmt_g(1.0, 12), "1");
        assert_eq!(fmt_g(-2.5, 12), "-2.5");
        assert_eq!(fmt_g(std::f64::consts::PI, 12), "3.14159265359");
        assert_eq!(fmt_g(1e-5, 12), "1e-05");
        assert_eq!(fmt_g(1.5e-4, 12), "0.00015");
        assert_eq!(fmt_g(123456789012.0, 12), "123456789012");
        assert_eq!(fmt_g(1234567890123.0, 12), "1.23456789012e+12");
        assert_eq!(fmt_g(0.1 + 0.2, 12), "0.3");
        assert_eq!(fmt_g(9.9999999999999e5, 12), "1000000");
    }

    #[test]
    fn round_trip_is_idempotent() {
        for x in [0.123456789012345, -7.0e-9, 42.0, 1.0 / 3.0] {
            let r = round12(x);
            assert_eq!(round12(r), r);
            assert!((r - x).abs() <= 1e-11 * x.abs());
        }
    }
}
