//! Exact rational numbers for protocol parameters.
//!
//! Decimal parameters such as `0.0001` are parsed digit-exactly, so
//! arithmetic like `2_000_000 / 0.0001` lands on integers instead of
//! binary-float neighbours.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedDiv, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FractionError {
    #[error("cannot parse {0:?} as a decimal or n/d fraction")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("value out of range")]
    Overflow,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<i128>);

impl Fraction {
    pub const ZERO: Fraction = Fraction(Ratio::new_raw(0, 1));
    pub const ONE: Fraction = Fraction(Ratio::new_raw(1, 1));

    pub fn new(numer: i128, denom: i128) -> Result<Self, FractionError> {
        if denom == 0 {
            return Err(FractionError::DivisionByZero);
        }
        Ok(Fraction(Ratio::new(numer, denom)))
    }

    pub fn from_integer(v: i128) -> Self {
        Fraction(Ratio::from_integer(v))
    }

    /// Parses `123`, `-0.0001`, `1e-4`, `2.5E3` or `3/4` exactly.
    pub fn parse(s: &str) -> Result<Self, FractionError> {
        let err = || FractionError::Parse(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| err())?;
            let d: i128 = d.trim().parse().map_err(|_| err())?;
            return Fraction::new(n, d);
        }
        let (mantissa, exponent) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (negative, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
        {
            return Err(err());
        }
        let joined = format!("{int_part}{frac_part}");
        let numer: i128 = joined
            .trim_start_matches('0')
            .parse()
            .or_else(|e| {
                if joined.chars().all(|c| c == '0') {
                    Ok(0)
                } else {
                    Err(e)
                }
            })
            .map_err(|_| FractionError::Overflow)?;
        let scale = exponent - frac_part.len() as i32;
        let pow = |p: u32| 10i128.checked_pow(p).ok_or(FractionError::Overflow);
        let value = if scale >= 0 {
            Ratio::from_integer(
                numer
                    .checked_mul(pow(scale as u32)?)
                    .ok_or(FractionError::Overflow)?,
            )
        } else {
            Ratio::new(numer, pow(scale.unsigned_abs())?)
        };
        Ok(Fraction(if negative { -value } else { value }))
    }

    /// Converts through the shortest round-trip decimal representation, so
    /// `0.0001_f64` becomes exactly 1/10000.
    pub fn from_f64(v: f64) -> Result<Self, FractionError> {
        if !v.is_finite() {
            return Err(FractionError::Parse(v.to_string()));
        }
        Fraction::parse(&format!("{v:?}"))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn floor(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_div(self, rhs: Fraction) -> Result<Fraction, FractionError> {
        if rhs.is_zero() {
            return Err(FractionError::DivisionByZero);
        }
        self.0
            .checked_div(&rhs.0)
            .map(Fraction)
            .ok_or(FractionError::Overflow)
    }

    /// True when strictly inside (0, 1).
    pub fn is_proper(&self) -> bool {
        *self > Fraction::ZERO && *self < Fraction::ONE
    }
}

impl Add for Fraction {
    type Output = Fraction;
    fn add(self, rhs: Fraction) -> Fraction {
        Fraction(self.0 + rhs.0)
    }
}

impl Sub for Fraction {
    type Output = Fraction;
    fn sub(self, rhs: Fraction) -> Fraction {
        Fraction(self.0 - rhs.0)
    }
}

impl Mul for Fraction {
    type Output = Fraction;
    fn mul(self, rhs: Fraction) -> Fraction {
        Fraction(self.0 * rhs.0)
    }
}

impl From<u64> for Fraction {
    fn from(v: u64) -> Self {
        Fraction::from_integer(i128::from(v))
    }
}

impl FromStr for Fraction {
    type Err = FractionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fraction::parse(s)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fraction({self})")
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match (self.is_integer(), i64::try_from(self.numer())) {
            (true, Ok(v)) => s.serialize_i64(v),
            _ => s.serialize_f64(self.to_f64()),
        }
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Fraction::from_integer(i128::from(v))),
            Repr::Float(v) => Fraction::from_f64(v),
            Repr::Text(s) => Fraction::parse(&s),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}
