//! Scalar abstraction shared by every time, length and cost computation.
//!
//! The simulator is written once against [`Scalar`] and instantiated with an
//! exact rational type ([`crate::Rational`]) for all verification work. An
//! `f64` instantiation exists for quick exploratory runs; saturation is always
//! committed by assignment, so floating point drift never produces an
//! over-full counter, but event ordering may differ from the exact run.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// True when `+ - * /` are exact.
    const EXACT: bool;

    /// `2^exp`, exactly representable for every supported type.
    fn pow2(exp: i32) -> Self;

    /// Parses an integer (`"12"`), a decimal (`"-0.125"`) or a fraction (`"1/17"`).
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Canonical text form; `parse_decimal(x.to_decimal_string()) == x`.
    fn to_decimal_string(&self) -> String;

    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits every scalar")
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    /// Largest `i` with `2^i <= self`; `None` for non-positive values.
    fn floor_log2(&self) -> Option<i32> {
        if *self <= Self::zero() {
            return None;
        }
        let mut exp = 0i32;
        let two = Self::one() + Self::one();
        if *self >= Self::one() {
            let mut p = Self::one();
            while p.clone() * two.clone() <= *self {
                p = p * two.clone();
                exp += 1;
            }
        } else {
            let mut p = Self::one();
            while p > *self {
                p = p / two.clone();
                exp -= 1;
            }
        }
        Some(exp)
    }
}

fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    if negative {
        num = -num;
    }
    let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
    Some(BigRational::new(num, den))
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn pow2(exp: i32) -> Self {
        let p = num_traits::pow(BigInt::from(2u32), exp.unsigned_abs() as usize);
        if exp >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        parse_rational(text)
    }

    fn to_decimal_string(&self) -> String {
        if self.is_integer() {
            return self.numer().to_string();
        }
        // Terminating decimals only when the reduced denominator is 2^a 5^b.
        let mut den = self.denom().clone();
        let two = BigInt::from(2u32);
        let five = BigInt::from(5u32);
        let (mut twos, mut fives) = (0usize, 0usize);
        while den.is_multiple_of(&two) {
            den /= &two;
            twos += 1;
        }
        while den.is_multiple_of(&five) {
            den /= &five;
            fives += 1;
        }
        if !den.is_one() {
            return format!("{}/{}", self.numer(), self.denom());
        }
        let places = twos.max(fives);
        let scale = num_traits::pow(BigInt::from(10u32), places);
        let scaled = (self.numer() * &scale) / self.denom();
        let negative = scaled.is_negative();
        let digits = scaled.abs().to_string();
        let digits = if digits.len() <= places { format!("{}{}", "0".repeat(places + 1 - digits.len()), digits) } else { digits };
        let (int_part, frac_part) = digits.split_at(digits.len() - places);
        let sign = if negative { "-" } else { "" };
        format!("{sign}{int_part}.{frac_part}")
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn pow2(exp: i32) -> Self {
        2f64.powi(exp)
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        if let Ok(v) = text.trim().parse::<f64>() {
            return Some(v);
        }
        parse_rational(text).and_then(|r| r.to_f64())
    }

    fn to_decimal_string(&self) -> String {
        format!("{self}")
    }
}

/// A value that may be `+inf`, used for penalties past a deadline.
#[derive(Clone, Debug, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Extended<T> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn into_finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }
}

impl<T: Scalar> PartialOrd for Extended<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Some(Ordering::Less),
            (Extended::Infinite, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::Infinite, Extended::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<T: Scalar> Display for Extended<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{}", v.to_decimal_string()),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        BigRational::parse_decimal(s).unwrap()
    }

    #[test]
    fn parses_integers_decimals_and_fractions() {
        assert_eq!(q("3"), BigRational::from_integer(3.into()));
        assert_eq!(q("-0.125"), BigRational::new((-1).into(), 8.into()));
        assert_eq!(q("1/17"), BigRational::new(1.into(), 17.into()));
        assert_eq!(q(".5"), BigRational::new(1.into(), 2.into()));
        assert!(BigRational::parse_decimal("1/0").is_none());
        assert!(BigRational::parse_decimal("abc").is_none());
        assert!(BigRational::parse_decimal("").is_none());
    }

    #[test]
    fn text_form_round_trips() {
        for s in ["0", "7", "-3", "0.5", "-0.0625", "1/3", "22/7", "0.002", "-12.75"] {
            let v = q(s);
            assert_eq!(q(&v.to_decimal_string()), v, "{s}");
        }
        assert_eq!(q("0.50").to_decimal_string(), "0.5");
        assert_eq!(q("1/3").to_decimal_string(), "1/3");
        assert_eq!(q("-1/20").to_decimal_string(), "-0.05");
    }

    #[test]
    fn pow2_and_floor_log2() {
        assert_eq!(BigRational::pow2(3), q("8"));
        assert_eq!(BigRational::pow2(-2), q("0.25"));
        assert_eq!(q("5").floor_log2(), Some(2));
        assert_eq!(q("4").floor_log2(), Some(2));
        assert_eq!(q("0.3").floor_log2(), Some(-2));
        assert_eq!(q("0").floor_log2(), None);
        assert_eq!(5.0f64.floor_log2(), Some(2));
    }

    #[test]
    fn extended_ordering() {
        let a = Extended::Finite(q("1"));
        assert!(a < Extended::Infinite);
        assert!(Extended::Finite(q("2")) > a);
    }
}
