//! Extended reals on `[-inf, +inf]` with the `1/0 = +inf`, `1/inf = 0` convention.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number or one of the two infinities. NaN is never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);
    pub const NEG_INFINITY: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    /// Wraps `v`; panics on NaN.
    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "ExtReal cannot hold NaN");
        ExtReal(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_pos_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }

    /// Reciprocal with `1/0 = +inf` (for either signed zero) and `1/±inf = 0`.
    pub fn recip(self) -> Self {
        if self.0 == 0.0 {
            ExtReal::INFINITY
        } else if self.0.is_infinite() {
            ExtReal::ZERO
        } else {
            ExtReal(1.0 / self.0)
        }
    }

    /// `pi / sqrt(2 x)` for `x` in `[0, +inf]`, the threshold shape that appears in every
    /// existence window. Negative inputs have no real square root and give `None`.
    pub fn pi_over_sqrt_twice(self) -> Option<ExtReal> {
        if self.0 < 0.0 {
            return None;
        }
        if self.0 == 0.0 {
            return Some(ExtReal::INFINITY);
        }
        if self.0.is_infinite() {
            return Some(ExtReal::ZERO);
        }
        Some(ExtReal(PI / (2.0 * self.0).sqrt()))
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::new(v)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "inf")
        } else if self.0 == f64::NEG_INFINITY {
            write!(f, "-inf")
        } else {
            write!(f, "{:.16e}", self.0)
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            serializer.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(ExtReal(v)),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(ExtReal::INFINITY),
                "-inf" => Ok(ExtReal::NEG_INFINITY),
                other => other
                    .parse::<f64>()
                    .ok()
                    .filter(|v| !v.is_nan())
                    .map(ExtReal)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad extended real {other:?}"))),
            },
        }
    }
}
