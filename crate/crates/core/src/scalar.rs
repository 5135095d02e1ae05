//! Scalar abstraction shared by every solver in the crate.
//!
//! All model arithmetic is written against [`Scalar`], so the same code runs
//! on `f64`/`f32` for benchmarks and on exact rationals when results must be
//! compared bit-for-bit (solver versus oracle, path totals against targets).

use std::fmt;
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used for exact runs.
pub type Rational = BigRational;

/// Number type the model is generic over.
pub trait Scalar:
    Clone + fmt::Debug + fmt::Display + PartialOrd + Num + Signed + Sum + Send + Sync + 'static
{
    /// Converts a decimal parameter. Rational implementations read the
    /// shortest round-trip decimal form, so `0.01` becomes exactly `1/100`.
    fn from_f64(value: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Relative slack under which two values count as tied.
    /// Zero for exact types.
    fn tie_tolerance() -> Self;

    /// How far a prior may sum from 1.
    fn prior_slack() -> f64 {
        1e-12
    }

    /// Counts (override tallies, grid indices) are far below 2^53.
    fn from_usize(value: usize) -> Self {
        Self::from_f64(value as f64)
    }

    fn is_finite_value(&self) -> bool {
        self.to_f64().is_finite()
    }

    /// Nearest value to an exact rational.
    fn from_rational(value: &BigRational) -> Self {
        Self::from_f64(value.to_f64_lossy())
    }
}

/// `a < b` beyond the tie tolerance of the scalar type.
pub fn strictly_less<S: Scalar>(a: &S, b: &S) -> bool {
    let tol = S::tie_tolerance();
    if tol.is_zero() {
        return a < b;
    }
    let scale = if b.abs() > S::one() { b.abs() } else { S::one() };
    a.clone() < b.clone() - tol * scale
}

/// `a` and `b` equal up to the tie tolerance.
pub fn approx_eq<S: Scalar>(a: &S, b: &S) -> bool {
    !strictly_less(a, b) && !strictly_less(b, a)
}

/// Minimum of a non-empty iterator, `None` when empty.
pub fn min_of<S: Scalar, I: IntoIterator<Item = S>>(values: I) -> Option<S> {
    values
        .into_iter()
        .fold(None, |best: Option<S>, v| match best {
            Some(b) if b <= v => Some(b),
            _ => Some(v),
        })
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tie_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn from_f64(value: f64) -> Self {
        value as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn tie_tolerance() -> Self {
        1e-4
    }
    fn prior_slack() -> f64 {
        1e-6
    }
}

impl Scalar for BigRational {
    fn from_f64(value: f64) -> Self {
        assert!(value.is_finite(), "non-finite value {value} has no rational form");
        // Display for f64 prints the shortest decimal that round-trips and
        // never switches to exponent notation.
        parse_decimal(&format!("{value}")).expect("f64 display is a plain decimal")
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }
    fn tie_tolerance() -> Self {
        BigRational::zero()
    }
    fn from_rational(value: &BigRational) -> Self {
        value.clone()
    }
}

trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
}

/// Parses `[-]digits[.digits]` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let denom = num_traits::pow(BigInt::from(10u8), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}

/// Parses a decimal or an `a/b` fraction.
pub fn parse_number(text: &str) -> Option<BigRational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let (n, d) = (parse_decimal(n.trim())?, parse_decimal(d.trim())?);
            (!d.is_zero()).then(|| n / d)
        }
        None => parse_decimal(text),
    }
}

/// Exact rational from a ratio of integers.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parameters_become_exact_fractions() {
        assert_eq!(Rational::from_f64(0.01), ratio(1, 100));
        assert_eq!(Rational::from_f64(-12.5), ratio(-25, 2));
        assert_eq!(Rational::from_f64(400.0), ratio(400, 1));
        assert_eq!(Rational::from_f64(0.1033), ratio(1033, 10000));
    }

    #[test]
    fn exact_products_match_hand_arithmetic() {
        let theta = Rational::from_f64(0.01);
        let value = Rational::from_f64(30.0) + theta * Rational::from_f64(400.0);
        assert_eq!(value, ratio(34, 1));
    }

    #[test]
    fn tolerance_only_applies_to_floats() {
        assert!(!strictly_less(&1.0, &(1.0 + 1e-12)));
        assert!(strictly_less(&1.0, &1.1));
        let third = ratio(1, 3);
        assert!(strictly_less(&third, &(third.clone() + ratio(1, 1_000_000_000_000))));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_decimal("1e5").is_none());
        assert!(parse_decimal("").is_none());
        assert!(parse_decimal("abc").is_none());
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_number("1/3"), Some(ratio(1, 3)));
        assert_eq!(parse_number(" 2 / 0.5 "), Some(ratio(4, 1)));
        assert!(parse_number("1/0").is_none());
        assert_eq!(f64::from_rational(&ratio(1, 4)), 0.25);
    }
}
