//! Exact rationals with total inversion (the ordered meadow of rationals).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number, always in lowest terms with a positive
/// denominator.
///
/// Inversion is total: `Rational::zero().inv()` is zero, and therefore
/// `x.div(&0) == 0` for every `x`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in rational literal `{0}`")]
    ZeroDenominator(String),
}

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Rational {
        let denom = denom.into();
        if denom.is_zero() {
            // p/0 read as p·0⁻¹ = 0
            return Rational::zero();
        }
        Rational(BigRational::new(numer.into(), denom))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Rational {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Rational {
        Rational(BigRational::zero())
    }

    pub fn one() -> Rational {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Meadow inverse: `0⁻¹ = 0`, otherwise the field inverse.
    pub fn inv(&self) -> Rational {
        if self.0.is_zero() {
            Rational::zero()
        } else {
            Rational(self.0.recip())
        }
    }

    /// Total division `self · other⁻¹`.
    pub fn div(&self, other: &Rational) -> Rational {
        self * &other.inv()
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.abs())
    }

    pub fn min(self, other: Rational) -> Rational {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Rational) -> Rational {
        std::cmp::max(self, other)
    }

    pub fn clamp_unit(self) -> Rational {
        self.max(Rational::zero()).min(Rational::one())
    }

    pub fn is_unit_interval(&self) -> bool {
        !self.is_negative() && *self <= Rational::one()
    }

    /// Lossy conversion for display-only statistics.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Rational {
        Rational::from_integer(v)
    }
}

impl From<BigRational> for Rational {
    fn from(v: BigRational) -> Rational {
        Rational(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(text: &str, whole: &str) -> Result<BigInt, ParseRationalError> {
    let t = text.trim();
    let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRationalError::Invalid(whole.to_string()));
    }
    t.parse::<BigInt>()
        .map_err(|_| ParseRationalError::Invalid(whole.to_string()))
}

/// Parses `p/q` or an integer. A zero denominator is rejected here; inside
/// meadow expressions `p/0` is an ordinary division and evaluates to 0.
impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Rational, ParseRationalError> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        match s.split_once('/') {
            None => Ok(Rational::from_integer(parse_int(s, s)?)),
            Some((p, q)) => {
                let p = parse_int(p, s)?;
                let q = parse_int(q, s)?;
                if q.is_zero() {
                    return Err(ParseRationalError::ZeroDenominator(s.to_string()));
                }
                Ok(Rational(BigRational::new(p, q)))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn zero_inverse_is_zero() {
        assert_eq!(Rational::zero().inv(), Rational::zero());
        assert_eq!(r("7").div(&Rational::zero()), Rational::zero());
    }

    #[test]
    fn renders_lowest_terms() {
        assert_eq!(r("6/4").to_string(), "3/2");
        assert_eq!(r("-10/5").to_string(), "-2");
        assert_eq!(r("3/-6").to_string(), "-1/2");
        assert_eq!(r("0/9").to_string(), "0");
    }

    #[test]
    fn rejects_bad_literals() {
        assert!(matches!("".parse::<Rational>(), Err(ParseRationalError::Empty)));
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        assert!("1.5".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
        assert!("1/".parse::<Rational>().is_err());
    }

    #[test]
    fn serde_uses_text_form() {
        let v = serde_json::to_string(&r("-3/4")).unwrap();
        assert_eq!(v, "\"-3/4\"");
        let back: Rational = serde_json::from_str(&v).unwrap();
        assert_eq!(back, r("-3/4"));
    }
}
