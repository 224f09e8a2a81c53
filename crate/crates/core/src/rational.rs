//! Exact rational helpers.
//!
//! Every constant fed to the solver and every value read back from a model is
//! a [`Rat`]. Binary floats appear only when printing for humans.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

pub fn int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3"`, `"-3/4"`, `"0.125"`, `"1e-3"`-free decimals.
pub fn parse(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rat::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("bad rational {s:?}"));
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("bad rational {s:?}"));
    }
    let digits = format!("{whole}{frac}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|e| e.to_string())?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let r = Rat::new(n, d);
    Ok(if neg { -r } else { r })
}

/// Canonical exact text: `"p/q"` or an integer.
pub fn to_exact(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering truncated toward zero after `places` digits. Exact when
/// the expansion terminates within `places`.
pub fn to_decimal(r: &Rat, places: usize) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let whole = a.to_integer();
    let mut rem = a - Rat::from_integer(whole.clone());
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&whole.to_string());
    if !rem.is_zero() && places > 0 {
        out.push('.');
        let ten = Rat::from_integer(BigInt::from(10));
        for _ in 0..places {
            rem *= &ten;
            let d = rem.to_integer();
            out.push_str(&d.to_string());
            rem -= Rat::from_integer(d);
            if rem.is_zero() {
                break;
            }
        }
    }
    out
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite float (used only for CLI convenience input).
pub fn from_f64(v: f64) -> Option<Rat> {
    Rat::from_float(v)
}

pub fn half() -> Rat {
    Rat::new(BigInt::one(), BigInt::from(2))
}

pub mod serde_rat {
    //! Serde adapter storing a rational as its exact string form.
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_exact(r))
    }

    /// Accepts an exact string, an integer, or a decimal number; decimals
    /// are read from their shortest printed form, so `1.1` becomes 11/10.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Str(String),
        Int(i64),
        Float(f64),
    }

    impl Repr {
        pub(super) fn into_rat(self) -> Result<Rat, String> {
            match self {
                Repr::Str(s) => parse(&s),
                Repr::Int(v) => Ok(int(v)),
                Repr::Float(v) if v.is_finite() => parse(&format!("{v}")),
                Repr::Float(v) => Err(format!("not a finite number: {v}")),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        Repr::deserialize(d)?.into_rat().map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&to_exact(r))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| r.into_rat().map_err(serde::de::Error::custom))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&to_exact(r)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
            let r = Option::<Repr>::deserialize(d)?;
            r.map(|r| r.into_rat().map_err(serde::de::Error::custom)).transpose()
        }
    }
}
