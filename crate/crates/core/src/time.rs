use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A time or duration in tenths of a millisecond.
///
/// Every boundary the aligner produces lies on the frame grid
/// `frame_offset + t * frame_hop`, and both of those are stored at this
/// resolution, so boundary arithmetic is exact integer arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ticks(pub u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    /// Rounds a millisecond value to the tick grid. Rejects negative and
    /// non-finite input.
    pub fn from_ms(ms: f64) -> Option<Ticks> {
        if !ms.is_finite() || ms < 0.0 {
            return None;
        }
        let t = (ms * 10.0).round();
        (t <= u64::MAX as f64).then_some(Ticks(t as u64))
    }

    /// Like [`Ticks::from_ms`] but only accepts values already on the grid.
    pub fn from_ms_exact(ms: f64) -> Option<Ticks> {
        let t = Self::from_ms(ms)?;
        ((t.0 as f64 - ms * 10.0).abs() < 1e-6).then_some(t)
    }

    pub fn ms(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / 10_000.0
    }

    pub fn saturating_sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.ms())
    }
}

/// Serializes `f64` values that may be negative infinity. JSON has no
/// infinities, so `-inf` is written as the string `"-inf"`.
pub(crate) mod maybe_neg_inf {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            Err(serde::ser::Error::custom(format!("cannot serialize {v}")))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(LogVisitor)
    }

    pub(crate) struct LogVisitor;

    impl<'de> Visitor<'de> for LogVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number, null, or \"-inf\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_unit<E: de::Error>(self) -> Result<f64, E> {
            Ok(f64::NEG_INFINITY)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "-inf" | "-Infinity" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("unexpected string {other:?}"))),
            }
        }
    }
}
