//! The configurable-precision real scalar and its small helper kit.
//!
//! [`BigReal`] is an alias for [`rug::Float`] (MPFR): every value carries
//! its own precision, all operations are correctly rounded, and results
//! are bit-reproducible across runs, which is what makes rule files
//! deterministic. Helpers here cover the conversions the rest of the
//! crate needs: exact integers and rationals in, decimal strings out and
//! back in again without losing a bit.

use crate::error::{Error, Result};
use rug::{Float, Integer, Rational};

/// Arbitrary (per-value) precision real scalar.
pub type BigReal = Float;

/// A fresh zero at the given precision.
pub fn zero(prec: u32) -> BigReal {
    Float::new(prec)
}

/// Exact integer, rounded into the given precision.
pub fn from_integer(prec: u32, v: &Integer) -> BigReal {
    Float::with_val(prec, v)
}

/// Exact rational, rounded into the given precision.
pub fn from_rational(prec: u32, v: &Rational) -> BigReal {
    Float::with_val(prec, v)
}

/// `2^exp` exactly.
pub fn pow2(prec: u32, exp: i32) -> BigReal {
    let one = Float::with_val(prec, 1);
    if exp >= 0 {
        one << exp as u32
    } else {
        one >> (-exp) as u32
    }
}

/// Evaluates a polynomial with exact integer coefficients (ascending
/// order) at `x`, by Horner's scheme at `x`'s precision.
pub fn eval_poly(coeffs: &[Integer], x: &BigReal) -> BigReal {
    let prec = x.prec();
    let mut acc = Float::new(prec);
    for c in coeffs.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

/// Number of significant decimal digits that round-trips a binary float
/// of `prec` bits through decimal text: `ceil(prec·log10(2)) + 2`, padded
/// a little further for safety.
pub fn roundtrip_digits(prec: u32) -> usize {
    (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 7
}

/// Renders `x` as a decimal string with enough digits that parsing it
/// back at the same precision reproduces `x` bit-exactly.
pub fn to_decimal_string(x: &BigReal) -> String {
    x.to_string_radix(10, Some(roundtrip_digits(x.prec())))
}

/// Parses a decimal string at the given precision (correctly rounded).
pub fn parse_decimal(s: &str, prec: u32) -> Result<BigReal> {
    let parsed = Float::parse(s).map_err(|e| Error::Parse(format!("{e}: {s:?}")))?;
    Ok(Float::with_val(prec, parsed))
}
