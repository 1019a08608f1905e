//! Scalar field abstraction with an exact rational and a binary64 realization.
//!
//! Every algorithm in the crate is generic over [`Scalar`]. Running the same
//! code with [`Rational`] gives exact answers that can be compared for
//! equality; running it with `f64` gives the fast path with tolerances.
//! Mixing the two in one matrix is a type error.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse scalar literal {literal:?}: {reason}")]
pub struct ParseScalarError {
    pub literal: String,
    pub reason: &'static str,
}

impl ParseScalarError {
    fn new(literal: &str, reason: &'static str) -> Self {
        Self {
            literal: literal.to_owned(),
            reason,
        }
    }
}

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// `true` for the exact backend, where equality is decidable.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Self::from_i64(numer) / Self::from_i64(denom)
    }

    fn to_f64(&self) -> f64;

    /// Parses `"p/q"`, integer, or decimal literals (`"0.5"`, `"-1.25e-3"`).
    fn parse_literal(s: &str) -> Result<Self, ParseScalarError>;

    /// Exact: `self == 0`. Float: `|self| <= rel_tol * max(|scale|, 1e-300)`.
    fn is_negligible(&self, scale: &Self, rel_tol: f64) -> bool;

    /// `self^exponent` when representable in this realization.
    ///
    /// The exact backend only supports integer exponents (and a nonzero base
    /// for negative ones).
    fn pow_exponent(&self, exponent: &Self) -> Option<Self>;

    /// Some(n) when the value is a nonnegative integer that fits in `u32`.
    fn as_nonneg_integer(&self) -> Option<u32>;

    fn is_finite_value(&self) -> bool {
        true
    }

    fn max_abs<'a>(values: impl IntoIterator<Item = &'a Self>) -> Self {
        values
            .into_iter()
            .map(Signed::abs)
            .fold(Self::zero(), |m, v| if v > m { v } else { m })
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_literal(s: &str) -> Result<Self, ParseScalarError> {
        let t = s.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p = parse_signed_integer(p).ok_or_else(|| ParseScalarError::new(s, "bad numerator"))?;
            let q = parse_signed_integer(q).ok_or_else(|| ParseScalarError::new(s, "bad denominator"))?;
            if q.is_zero() {
                return Err(ParseScalarError::new(s, "zero denominator"));
            }
            let r = Rational::new(p, q);
            return Ok(num_traits::ToPrimitive::to_f64(&r).unwrap_or(f64::NAN));
        }
        let v = f64::from_str(t).map_err(|_| ParseScalarError::new(s, "not a number"))?;
        if !v.is_finite() {
            return Err(ParseScalarError::new(s, "not finite"));
        }
        Ok(v)
    }

    fn is_negligible(&self, scale: &Self, rel_tol: f64) -> bool {
        self.abs() <= rel_tol * scale.abs().max(1e-300)
    }

    fn pow_exponent(&self, exponent: &Self) -> Option<Self> {
        if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
            Some(self.powi(*exponent as i32))
        } else {
            Some(self.powf(*exponent))
        }
    }

    fn as_nonneg_integer(&self) -> Option<u32> {
        if *self >= 0.0 && self.fract() == 0.0 && *self <= u32::MAX as f64 {
            Some(*self as u32)
        } else {
            None
        }
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Rational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn parse_literal(s: &str) -> Result<Self, ParseScalarError> {
        let t = s.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p = parse_signed_integer(p).ok_or_else(|| ParseScalarError::new(s, "bad numerator"))?;
            let q = parse_signed_integer(q).ok_or_else(|| ParseScalarError::new(s, "bad denominator"))?;
            if q.is_zero() {
                return Err(ParseScalarError::new(s, "zero denominator"));
            }
            return Ok(Rational::new(p, q));
        }
        parse_decimal(t).ok_or_else(|| ParseScalarError::new(s, "not a decimal or p/q literal"))
    }

    fn is_negligible(&self, _scale: &Self, _rel_tol: f64) -> bool {
        self.is_zero()
    }

    fn pow_exponent(&self, exponent: &Self) -> Option<Self> {
        if !exponent.is_integer() {
            return None;
        }
        let e = exponent.to_integer().to_i32()?;
        if e < 0 && self.is_zero() {
            return None;
        }
        Some(num_traits::pow::Pow::pow(self, e))
    }

    fn as_nonneg_integer(&self) -> Option<u32> {
        if self.is_integer() && !self.is_negative() {
            self.to_integer().to_u32()
        } else {
            None
        }
    }
}

fn parse_signed_integer(s: &str) -> Option<BigInt> {
    let t = s.trim();
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(t.strip_prefix('+').unwrap_or(t)).ok()
}

/// Exact value of a decimal literal such as `-12.5e-3`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, body) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(BigInt::from_str_radix(&digits, 10).ok()?);
    let scale = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow::Pow::pow(&ten, scale);
    } else {
        value /= num_traits::pow::Pow::pow(&ten, -scale);
    }
    if negative {
        value = -value;
    }
    Some(value)
}

/// Shorthand for an exact rational `numer/denom`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::from_ratio(numer, denom)
}

/// Rising factorial `z (z+1) ... (z+n-1)`, with `(z)_0 = 1`.
pub fn pochhammer<T: Scalar>(z: &T, n: u32) -> T {
    (0..n).fold(T::one(), |acc, i| acc * (z.clone() + T::from_i64(i64::from(i))))
}

/// `a! b! / (a+b+1)!`, the integral of `x^a (1-x)^b` over `[0, 1]`.
pub fn beta_integral_exact(a: u32, b: u32) -> Rational {
    // a! b! / (a+b+1)! = 1 / ((a+b+1) * C(a+b, a))
    let n = a + b;
    let binom = num_integer::binomial(BigInt::from(n), BigInt::from(a));
    Rational::new(BigInt::one(), binom * BigInt::from(n + 1))
}
