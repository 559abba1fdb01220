//! Exact non-negative monetary amounts.
//!
//! Every quantity in a network (liabilities, external assets, payments and
//! total assets) is a [`Money`]. Inputs are integers, but proportional
//! clearing produces fractions, so the representation is an exact rational.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Signed rational used for asset changes (`after - before`).
pub type Delta = BigRational;

/// A non-negative exact rational amount.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(BigRational);

impl Money {
    pub fn zero() -> Self {
        Money(BigRational::zero())
    }

    pub fn one() -> Self {
        Money(BigRational::one())
    }

    pub fn from_int(value: u64) -> Self {
        Money(BigRational::from_integer(BigInt::from(value)))
    }

    /// Builds `numer / denom`; panics on a zero denominator.
    pub fn ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        Money(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Wraps a rational, returning `None` if it is negative.
    pub fn from_rational(value: BigRational) -> Option<Self> {
        if value.is_negative() {
            None
        } else {
            Some(Money(value))
        }
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// The integer value, if this amount is integral and fits in a `u64`.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0.is_integer() {
            self.0.to_integer().to_u64()
        } else {
            None
        }
    }

    /// `self - other`, clamped at zero.
    pub fn saturating_sub(&self, other: &Money) -> Money {
        if other >= self {
            Money::zero()
        } else {
            Money(&self.0 - &other.0)
        }
    }

    /// `self - other` as a signed value.
    pub fn delta(&self, other: &Money) -> Delta {
        &self.0 - &other.0
    }

    /// The smaller of two borrowed amounts.
    pub fn lesser(&self, other: &Money) -> Money {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Error for malformed amount strings.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount {0:?}: expected a non-negative integer or \"num/den\"")]
pub struct ParseMoneyError(pub String);

impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMoneyError(s.to_string());
        let t = s.trim();
        let parse_int = |x: &str| -> Result<BigInt, ParseMoneyError> {
            if x.is_empty() || !x.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            x.parse::<BigInt>().map_err(|_| err())
        };
        let value = match t.split_once('/') {
            Some((n, d)) => {
                let d = parse_int(d)?;
                if d.is_zero() {
                    return Err(err());
                }
                BigRational::new(parse_int(n)?, d)
            }
            None => BigRational::from_integer(parse_int(t)?),
        };
        Ok(Money(value))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(v) => Ok(Money::from_int(v)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl From<u64> for Money {
    fn from(value: u64) -> Self {
        Money::from_int(value)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Money> for &'a Money {
    type Output = Money;
    fn add(self, rhs: &'a Money) -> Money {
        Money(&self.0 + &rhs.0)
    }
}

impl AddAssign<&Money> for Money {
    fn add_assign(&mut self, rhs: &Money) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl<'a> Mul<&'a Money> for &'a Money {
    type Output = Money;
    fn mul(self, rhs: &'a Money) -> Money {
        Money(&self.0 * &rhs.0)
    }
}

impl<'a> Div<&'a Money> for &'a Money {
    type Output = Money;
    fn div(self, rhs: &'a Money) -> Money {
        assert!(!rhs.is_zero(), "division by zero amount");
        Money(&self.0 / &rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |mut acc, x| {
            acc += x;
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_integral_and_fractional() {
        assert_eq!(Money::from_int(7).to_string(), "7");
        assert_eq!(Money::ratio(4, 6).to_string(), "2/3");
    }

    #[test]
    fn parse_rejects_negative_and_floats() {
        assert_eq!("3".parse::<Money>().unwrap(), Money::from_int(3));
        assert_eq!("4/6".parse::<Money>().unwrap(), Money::ratio(2, 3));
        assert!("-1".parse::<Money>().is_err());
        assert!("1.5".parse::<Money>().is_err());
        assert!("1/0".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
    }

    #[test]
    fn json_accepts_integers_and_strings() {
        let a: Money = serde_json::from_str("5").unwrap();
        let b: Money = serde_json::from_str("\"1/2\"").unwrap();
        assert_eq!(a, Money::from_int(5));
        assert_eq!(b, Money::ratio(1, 2));
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"1/2\"");
        assert!(serde_json::from_str::<Money>("1.5").is_err());
    }

    #[test]
    fn saturating_sub_clamps() {
        let a = Money::from_int(2);
        let b = Money::from_int(5);
        assert_eq!(a.saturating_sub(&b), Money::zero());
        assert_eq!(b.saturating_sub(&a), Money::from_int(3));
    }
}
