//! Fixed 17-significant-digit rendering of real numbers in JSON output.
//!
//! Every floating-point value that reaches a JSON artifact goes through
//! [`fmt17`], so that two runs with equal inputs produce byte-identical files
//! and numbers round-trip exactly through `f64`.

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::scalar::Real;

/// Render `v` with exactly 17 significant digits.
///
/// Values with a decimal exponent in `[-5, 16]` use positional notation;
/// anything else keeps scientific notation. Non-finite values have no JSON
/// representation and yield `None`.
pub fn fmt17(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 17);
    if !(-5..=16).contains(&exp) {
        return Some(format!("{sign}{}.{}e{exp}", &digits[..1], &digits[1..]));
    }
    let out = if exp >= 0 {
        let split = (exp + 1) as usize;
        if split >= digits.len() {
            format!("{sign}{digits}.0")
        } else {
            format!("{sign}{}.{}", &digits[..split], &digits[split..])
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    };
    Some(out)
}

fn raw<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
    match fmt17(v) {
        Some(text) => RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(s),
        None => s.serialize_none(),
    }
}

/// `#[serde(with = "json::real")]` for a scalar field.
pub mod real {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        raw(v.as_f64(), s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let v = f64::deserialize(d)?;
        T::from_f64(v).ok_or_else(|| serde::de::Error::custom("value out of scalar range"))
    }
}

/// `#[serde(with = "json::opt_real")]` for an optional scalar field.
pub mod opt_real {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => raw(v.as_f64(), s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Option::<f64>::deserialize(d)? {
            Some(v) => T::from_f64(v)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom("value out of scalar range")),
            None => Ok(None),
        }
    }
}

/// Wrapper that serializes a plain `f64` with [`fmt17`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fixed17(pub f64);

impl Serialize for Fixed17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        raw(self.0, s)
    }
}

impl<'de> Deserialize<'de> for Fixed17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Fixed17)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn positional_rendering() {
        assert_eq!(fmt17(2.0).unwrap(), "2.0000000000000000");
        assert_eq!(fmt17(-0.5).unwrap(), "-0.50000000000000000");
        assert_eq!(fmt17(0.0).unwrap(), "0.0000000000000000");
        assert_eq!(fmt17(1e16).unwrap(), "10000000000000000.0");
        assert_eq!(fmt17(2.0f64.sqrt() * 2.0).unwrap(), "2.8284271247461903");
    }

    #[test]
    fn scientific_outside_window() {
        assert_eq!(fmt17(1e-7).unwrap(), "9.9999999999999995e-8");
        assert_eq!(fmt17(-2.5e20).unwrap(), "-2.5000000000000000e20");
        assert_eq!(fmt17(f64::NAN), None);
    }

    proptest! {
        #[test]
        fn rendering_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let text = fmt17(v).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
