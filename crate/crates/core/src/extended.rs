//! Extended real numbers `ℝ ∪ {−∞, +∞}`.
//!
//! Arithmetic follows the conventions used for extended-real gambles:
//! `+∞ − ∞ = −∞ + ∞ = +∞` and `0 · (±∞) = 0`. With these conventions addition is
//! total and commutative, which is what makes the extended local expectations
//! well defined.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtendedReal::{Finite, NegInf, PosInf};

impl ExtendedReal {
    pub const ZERO: ExtendedReal = Finite(0.0);

    /// Converts an `f64`, mapping the IEEE infinities onto the extended ones.
    ///
    /// NaN has no extended-real counterpart and is mapped to `None`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else if x == f64::INFINITY {
            Some(PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(NegInf)
        } else {
            Some(Finite(x))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            Finite(x) => x,
            PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `min(self, c)`, the upper cut at level `c`.
    pub fn cut_above(self, c: f64) -> Self {
        self.min(Finite(c))
    }

    /// `max(self, c)`, the lower cut at level `c`.
    pub fn cut_below(self, c: f64) -> Self {
        self.max(Finite(c))
    }

    /// Total order on extended reals; `Finite` values are never NaN.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.total_cmp(b),
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            _ => Some(self.total_cmp(other)),
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x).expect("NaN is not an extended real")
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            // +∞ absorbs everything, including −∞.
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Finite(a), Finite(b)) => {
                let s = a + b;
                ExtendedReal::from_f64(s).unwrap_or(PosInf)
            }
        }
    }
}

impl Neg for ExtendedReal {
    type Output = ExtendedReal;

    fn neg(self) -> Self {
        match self {
            NegInf => PosInf,
            Finite(x) => Finite(-x),
            PosInf => NegInf,
        }
    }
}

impl Mul<ExtendedReal> for f64 {
    type Output = ExtendedReal;

    /// Scalar product with the `0 · (±∞) = 0` convention.
    fn mul(self, rhs: ExtendedReal) -> ExtendedReal {
        if self == 0.0 {
            return Finite(0.0);
        }
        match rhs {
            Finite(x) => ExtendedReal::from(self * x),
            PosInf if self > 0.0 => PosInf,
            PosInf => NegInf,
            NegInf if self > 0.0 => NegInf,
            NegInf => PosInf,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => f.write_str("-inf"),
            PosInf => f.write_str("+inf"),
            Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Finite(x) => serializer.serialize_f64(*x),
            NegInf => serializer.serialize_str("-inf"),
            PosInf => serializer.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtendedReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"+inf\", \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtendedReal, E> {
                ExtendedReal::from_f64(v).ok_or_else(|| E::custom("NaN is not an extended real"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtendedReal, E> {
                Ok(Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtendedReal, E> {
                Ok(Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtendedReal, E> {
                match v {
                    "+inf" | "inf" => Ok(PosInf),
                    "-inf" => Ok(NegInf),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor)
    }
}
