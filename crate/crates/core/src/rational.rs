//! Exact rational helpers.
//!
//! All probabilities and realizations are carried as [`Rational`], an
//! arbitrary-precision fraction kept in lowest terms with a positive
//! denominator. This module adds the parsing and rendering conventions used
//! across the crate: `a/b` fraction syntax, exact decimal syntax, and a
//! canonical `a/b` rendering that always re-parses to the same value.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Result, WeaverError};

/// Arbitrary-precision fraction, always normalized.
pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_biguint(v: BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, v))
}

/// 2^e as an exact rational.
pub fn pow2(e: u32) -> Rational {
    from_biguint(BigUint::one() << e as usize)
}

/// Parses `a/b`, an integer, or a decimal such as `0.125`, `-3.5e-2`.
///
/// Decimals are converted digit by digit, so `0.1` becomes exactly `1/10`.
pub fn parse_rational(input: &str) -> Result<Rational> {
    let s = input.trim();
    let err = || WeaverError::Parse {
        input: input.to_string(),
    };
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| err())?;
        let den: BigInt = den.trim().parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (whole, fraction) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && fraction.is_empty() {
        return None;
    }
    if !whole.bytes().chain(fraction.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{whole}{fraction}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().ok()?);
    let scale = exponent - fraction.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if negative { -value } else { value })
}

/// Canonical `a/b` rendering. Integers are written with denominator 1.
pub fn format_fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Nearest binary64 value (saturating to ±inf for huge magnitudes).
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

fn log2_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        v.to_f64().map(f64::log2).unwrap_or(f64::NAN)
    } else {
        let shift = bits - 64;
        let top = (v >> shift as usize).to_f64().unwrap_or(f64::NAN);
        top.log2() + shift as f64
    }
}

/// Base-2 logarithm of a strictly positive rational.
pub fn log2(r: &Rational) -> f64 {
    debug_assert!(r.is_positive());
    log2_biguint(r.numer().magnitude()) - log2_biguint(r.denom().magnitude())
}

/// `true` iff 0 < r < 1.
pub fn is_open_unit(r: &Rational) -> bool {
    r.is_positive() && *r < Rational::one()
}
