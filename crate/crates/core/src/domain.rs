//! Domain types shared by every module: settings, outcomes, time indices,
//! trial records and counterfactual records.

use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::json;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("setting {label} belongs to station {expected:?}, not {got:?}")]
    WrongStation {
        label: Label,
        expected: Station,
        got: Station,
    },
    #[error("source token {id} outside alphabet of size {alphabet}")]
    TokenOutOfRange { id: u32, alphabet: u32 },
    #[error("outcome must be +1 or -1, got {0}")]
    InvalidOutcome(i64),
    #[error("unknown setting pair {0:?} (expected ac, ab, db or dc)")]
    UnknownPair(String),
    #[error("unknown setting label {0:?}")]
    UnknownLabel(String),
}

/// Measurement station.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Station {
    S1,
    S2,
}

/// Analyzer label. `a` and `d` live in station 1, `b` and `c` in station 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    A,
    D,
    B,
    C,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::D, Label::B, Label::C];

    pub fn station(self) -> Station {
        match self {
            Label::A | Label::D => Station::S1,
            Label::B | Label::C => Station::S2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::A => "a",
            Label::D => "d",
            Label::B => "b",
            Label::C => "c",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(Label::A),
            "d" => Ok(Label::D),
            "b" => Ok(Label::B),
            "c" => Ok(Label::C),
            other => Err(DomainError::UnknownLabel(other.to_string())),
        }
    }
}

/// Normalize an angle into `[0, 2π)`.
pub fn normalize_angle<T: Real>(angle: T) -> Result<T, DomainError> {
    if !angle.is_finite() {
        return Err(DomainError::NonFiniteAngle(angle.as_f64()));
    }
    let tau = T::TAU();
    let mut r = angle - tau * (angle / tau).floor();
    if r >= tau || r < T::zero() {
        r = T::zero();
    }
    Ok(r)
}

/// A labeled analyzer direction on the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting<T: Real = f64> {
    pub label: Label,
    #[serde(with = "json::real")]
    angle: T,
}

impl<T: Real> Setting<T> {
    pub fn new(label: Label, angle: T) -> Result<Self, DomainError> {
        Ok(Self {
            label,
            angle: normalize_angle(angle)?,
        })
    }

    pub fn angle(&self) -> T {
        self.angle
    }

    pub fn station(&self) -> Station {
        self.label.station()
    }
}

/// Minimal angular separation between two settings, folded into `[0, π]`.
pub fn angle_between<T: Real>(s1: &Setting<T>, s2: &Setting<T>) -> T {
    let tau = T::TAU();
    let mut d = (s1.angle - s2.angle).abs();
    if d >= tau {
        d = d - tau * (d / tau).floor();
    }
    if d > T::PI() {
        tau - d
    } else {
        d
    }
}

/// A single-station measurement result, exactly +1 or -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    /// `Plus` when `nonnegative`, so `sign(0)` resolves to +1.
    pub fn from_sign(nonnegative: bool) -> Self {
        if nonnegative {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn try_from_int(v: i64) -> Result<Self, DomainError> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(DomainError::InvalidOutcome(other)),
        }
    }
}

impl Mul for Outcome {
    type Output = Outcome;

    fn mul(self, rhs: Outcome) -> Outcome {
        Outcome::from_sign(self == rhs)
    }
}

impl Neg for Outcome {
    type Output = Outcome;

    fn neg(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Outcome::try_from_int(v).map_err(serde::de::Error::custom)
    }
}

/// Realized value of the source parameter, one of `M` symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceToken(pub u32);

impl SourceToken {
    pub fn new(id: u32, alphabet: u32) -> Result<Self, DomainError> {
        if id < alphabet {
            Ok(SourceToken(id))
        } else {
            Err(DomainError::TokenOutOfRange { id, alphabet })
        }
    }
}

/// Ordinal position in the measurement sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeIndex(pub u64);

/// One of the four setting pairs of the CHSH combination, in its canonical
/// order `+ac - ab - db - dc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    AC,
    AB,
    DB,
    DC,
}

impl Term {
    pub const ALL: [Term; 4] = [Term::AC, Term::AB, Term::DB, Term::DC];

    pub fn sign(self) -> i32 {
        match self {
            Term::AC => 1,
            Term::AB | Term::DB | Term::DC => -1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Term::AC => 0,
            Term::AB => 1,
            Term::DB => 2,
            Term::DC => 3,
        }
    }

    pub fn labels(self) -> (Label, Label) {
        match self {
            Term::AC => (Label::A, Label::C),
            Term::AB => (Label::A, Label::B),
            Term::DB => (Label::D, Label::B),
            Term::DC => (Label::D, Label::C),
        }
    }

    pub fn from_labels(s1: Label, s2: Label) -> Option<Term> {
        match (s1, s2) {
            (Label::A, Label::C) => Some(Term::AC),
            (Label::A, Label::B) => Some(Term::AB),
            (Label::D, Label::B) => Some(Term::DB),
            (Label::D, Label::C) => Some(Term::DC),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Term::AC => "ac",
            Term::AB => "ab",
            Term::DB => "db",
            Term::DC => "dc",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Term {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::ALL
            .into_iter()
            .find(|t| t.code() == s)
            .ok_or_else(|| DomainError::UnknownPair(s.to_string()))
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four canonical pairs with the signs they carry in Δ.
pub fn canonical_pairs() -> [(Term, i32); 4] {
    Term::ALL.map(|t| (t, t.sign()))
}

/// One station-1 setting and one station-2 setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SettingPair<T: Real = f64> {
    s1: Setting<T>,
    s2: Setting<T>,
}

impl<T: Real> SettingPair<T> {
    pub fn new(s1: Setting<T>, s2: Setting<T>) -> Result<Self, DomainError> {
        if s1.station() != Station::S1 {
            return Err(DomainError::WrongStation {
                label: s1.label,
                expected: s1.station(),
                got: Station::S1,
            });
        }
        if s2.station() != Station::S2 {
            return Err(DomainError::WrongStation {
                label: s2.label,
                expected: s2.station(),
                got: Station::S2,
            });
        }
        Ok(Self { s1, s2 })
    }

    /// Equal-angle diagnostic pair: `a` and `b` both set to `angle`.
    pub fn diagnostic(angle: T) -> Result<Self, DomainError> {
        Self::new(Setting::new(Label::A, angle)?, Setting::new(Label::B, angle)?)
    }

    pub fn s1(&self) -> &Setting<T> {
        &self.s1
    }

    pub fn s2(&self) -> &Setting<T> {
        &self.s2
    }

    pub fn term(&self) -> Term {
        Term::from_labels(self.s1.label, self.s2.label).expect("stations checked on construction")
    }

    pub fn separation(&self) -> T {
        angle_between(&self.s1, &self.s2)
    }

    pub fn is_equal_angle(&self) -> bool {
        self.s1.angle == self.s2.angle
    }
}

/// Angles (radians) of the four analyzer settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSet<T: Real = f64> {
    #[serde(with = "json::real")]
    pub a: T,
    #[serde(with = "json::real")]
    pub d: T,
    #[serde(with = "json::real")]
    pub b: T,
    #[serde(with = "json::real")]
    pub c: T,
}

impl<T: Real> Default for AngleSet<T> {
    /// a = 0, d = π/2, b = π/4, c = 3π/4.
    fn default() -> Self {
        Self {
            a: T::zero(),
            d: T::FRAC_PI_2(),
            b: T::FRAC_PI_4(),
            c: T::lit(3.0) * T::FRAC_PI_4(),
        }
    }
}

impl<T: Real> AngleSet<T> {
    /// All four analyzers at the same angle.
    pub fn uniform(angle: T) -> Self {
        Self {
            a: angle,
            d: angle,
            b: angle,
            c: angle,
        }
    }

    pub fn normalized(self) -> Result<Self, DomainError> {
        Ok(Self {
            a: normalize_angle(self.a)?,
            d: normalize_angle(self.d)?,
            b: normalize_angle(self.b)?,
            c: normalize_angle(self.c)?,
        })
    }

    pub fn angle(&self, label: Label) -> T {
        match label {
            Label::A => self.a,
            Label::D => self.d,
            Label::B => self.b,
            Label::C => self.c,
        }
    }

    pub fn setting(&self, label: Label) -> Setting<T> {
        Setting::new(label, self.angle(label)).expect("angle set holds finite angles")
    }

    pub fn pair(&self, term: Term) -> SettingPair<T> {
        let (l1, l2) = term.labels();
        SettingPair::new(self.setting(l1), self.setting(l2)).expect("term labels split by station")
    }
}

/// One actual measurement event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial: u64,
    pub tick: TimeIndex,
    pub pair: Term,
    pub x: Outcome,
    pub y: Outcome,
    #[serde(rename = "lambda", default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceToken>,
}

impl TrialRecord {
    pub fn product(&self) -> Outcome {
        self.x * self.y
    }
}

/// The four potential single-station values A_a, A_d, B_b, B_c.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Profile {
    #[serde(rename = "A_a")]
    pub a: Outcome,
    #[serde(rename = "A_d")]
    pub d: Outcome,
    #[serde(rename = "B_b")]
    pub b: Outcome,
    #[serde(rename = "B_c")]
    pub c: Outcome,
}

impl Profile {
    pub fn value(&self, label: Label) -> Outcome {
        match label {
            Label::A => self.a,
            Label::D => self.d,
            Label::B => self.b,
            Label::C => self.c,
        }
    }

    /// Station values for one pair, as they would be recorded if that pair
    /// were the one actually chosen.
    pub fn outcomes(&self, term: Term) -> (Outcome, Outcome) {
        let (l1, l2) = term.labels();
        (self.value(l1), self.value(l2))
    }
}

/// Potential outcomes for one trial, or a marker that the model has none.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CounterfactualRecord {
    Definite {
        trial: u64,
        tick: TimeIndex,
        source: SourceToken,
        profile: Profile,
    },
    /// Runs use one trial per tick, so the tick of an unsupported record is
    /// its trial id.
    Unsupported { trial: u64 },
}

impl CounterfactualRecord {
    pub fn trial(&self) -> u64 {
        match self {
            CounterfactualRecord::Definite { trial, .. } | CounterfactualRecord::Unsupported { trial } => {
                *trial
            }
        }
    }

    pub fn tick(&self) -> TimeIndex {
        match self {
            CounterfactualRecord::Definite { tick, .. } => *tick,
            CounterfactualRecord::Unsupported { trial } => TimeIndex(*trial),
        }
    }

    pub fn is_supported(&self) -> bool {
        matches!(self, CounterfactualRecord::Definite { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefiniteLine {
    trial: u64,
    tick: TimeIndex,
    lambda: SourceToken,
    #[serde(rename = "A_a")]
    a: Outcome,
    #[serde(rename = "A_d")]
    d: Outcome,
    #[serde(rename = "B_b")]
    b: Outcome,
    #[serde(rename = "B_c")]
    c: Outcome,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnsupportedLine {
    trial: u64,
    unsupported: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CounterfactualLine {
    Unsupported(UnsupportedLine),
    Definite(DefiniteLine),
}

impl Serialize for CounterfactualRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            CounterfactualRecord::Definite {
                trial,
                tick,
                source,
                profile,
            } => DefiniteLine {
                trial,
                tick,
                lambda: source,
                a: profile.a,
                d: profile.d,
                b: profile.b,
                c: profile.c,
            }
            .serialize(s),
            CounterfactualRecord::Unsupported { trial } => UnsupportedLine {
                trial,
                unsupported: true,
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CounterfactualRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match CounterfactualLine::deserialize(d)? {
            CounterfactualLine::Unsupported(UnsupportedLine { trial, unsupported }) => {
                if !unsupported {
                    return Err(serde::de::Error::custom("\"unsupported\" must be true"));
                }
                Ok(CounterfactualRecord::Unsupported { trial })
            }
            CounterfactualLine::Definite(line) => Ok(CounterfactualRecord::Definite {
                trial: line.trial,
                tick: line.tick,
                source: line.lambda,
                profile: Profile {
                    a: line.a,
                    d: line.d,
                    b: line.b,
                    c: line.c,
                },
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn canonical_pairs_order_and_signs() {
        let pairs = canonical_pairs();
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs[0], (Term::AC, 1));
        assert_eq!(
            pairs.map(|(t, _)| t),
            [Term::AC, Term::AB, Term::DB, Term::DC]
        );
        assert_eq!(pairs.iter().map(|(_, s)| s).sum::<i32>(), -2);
    }

    #[test]
    fn angle_between_examples() {
        let s = |l, a| Setting::new(l, a).unwrap();
        assert_eq!(angle_between(&s(Label::A, 0.0), &s(Label::B, 0.0)), 0.0);
        let folded = angle_between(&s(Label::A, 0.0), &s(Label::B, 1.5 * PI));
        assert!((folded - PI / 2.0).abs() < 1e-15);
        let direct = angle_between(&s(Label::A, 0.0), &s(Label::B, 0.75 * PI));
        assert!((direct - 0.75 * PI).abs() < 1e-15);
    }

    #[test]
    fn settings_normalize_and_reject_non_finite() {
        let s = Setting::new(Label::A, -PI / 2.0).unwrap();
        assert!((s.angle() - 1.5 * PI).abs() < 1e-12);
        assert!(Setting::new(Label::A, 2.0 * PI).unwrap().angle() < 1e-12);
        assert!(Setting::new(Label::C, f64::NAN).is_err());
        assert!(Setting::<f32>::new(Label::C, f32::INFINITY).is_err());
    }

    #[test]
    fn pairs_enforce_stations() {
        let a = Setting::new(Label::A, 0.0).unwrap();
        let d = Setting::new(Label::D, 0.0).unwrap();
        let b = Setting::new(Label::B, 0.0).unwrap();
        assert!(SettingPair::new(a, b).is_ok());
        assert!(SettingPair::new(a, d).is_err());
        assert!(SettingPair::new(b, a).is_err());
        let diag = SettingPair::diagnostic(1.0).unwrap();
        assert!(diag.is_equal_angle());
        assert_eq!(diag.separation(), 0.0);
    }

    #[test]
    fn default_angles_give_expected_separations() {
        let angles = AngleSet::<f64>::default();
        let sep = |t| angles.pair(t).separation();
        assert!((sep(Term::AC) - 0.75 * PI).abs() < 1e-15);
        assert!((sep(Term::AB) - 0.25 * PI).abs() < 1e-15);
        assert!((sep(Term::DB) - 0.25 * PI).abs() < 1e-15);
        assert!((sep(Term::DC) - 0.25 * PI).abs() < 1e-15);
    }

    #[test]
    fn record_lines_match_file_format() {
        let rec = TrialRecord {
            trial: 3,
            tick: TimeIndex(3),
            pair: Term::DB,
            x: Outcome::Plus,
            y: Outcome::Minus,
            source: Some(SourceToken(5)),
        };
        assert_eq!(
            serde_json::to_string(&rec).unwrap(),
            r#"{"trial":3,"tick":3,"pair":"db","x":1,"y":-1,"lambda":5}"#
        );
        let cf = CounterfactualRecord::Definite {
            trial: 1,
            tick: TimeIndex(1),
            source: SourceToken(9),
            profile: Profile {
                a: Outcome::Plus,
                d: Outcome::Minus,
                b: Outcome::Plus,
                c: Outcome::Plus,
            },
        };
        let line = serde_json::to_string(&cf).unwrap();
        assert_eq!(
            line,
            r#"{"trial":1,"tick":1,"lambda":9,"A_a":1,"A_d":-1,"B_b":1,"B_c":1}"#
        );
        assert_eq!(serde_json::from_str::<CounterfactualRecord>(&line).unwrap(), cf);
        let un = CounterfactualRecord::Unsupported { trial: 4 };
        let line = serde_json::to_string(&un).unwrap();
        assert_eq!(line, r#"{"trial":4,"unsupported":true}"#);
        assert_eq!(serde_json::from_str::<CounterfactualRecord>(&line).unwrap(), un);
    }

    #[test]
    fn bad_outcomes_rejected() {
        assert!(serde_json::from_str::<Outcome>("0").is_err());
        assert!(serde_json::from_str::<TrialRecord>(
            r#"{"trial":0,"tick":0,"pair":"ac","x":2,"y":1}"#
        )
        .is_err());
        assert!(serde_json::from_str::<TrialRecord>(
            r#"{"trial":0,"tick":0,"pair":"ad","x":1,"y":1}"#
        )
        .is_err());
    }

    fn outcome() -> impl Strategy<Value = Outcome> {
        prop_oneof![Just(Outcome::Plus), Just(Outcome::Minus)]
    }

    proptest! {
        #[test]
        fn outcome_products_stay_binary(xs in proptest::collection::vec(outcome(), 1..20)) {
            let p = xs.iter().copied().reduce(|a, b| a * b).unwrap();
            let v: i64 = xs.iter().map(|o| o.value() as i64).product();
            prop_assert_eq!(p.value() as i64, v);
        }

        #[test]
        fn separation_is_symmetric_and_folded(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let s1 = Setting::new(Label::A, x).unwrap();
            let s2 = Setting::new(Label::B, y).unwrap();
            let d = angle_between(&s1, &s2);
            prop_assert!((0.0..=PI).contains(&d));
            prop_assert_eq!(d, angle_between(&s2, &s1));
            prop_assert!((0.0..2.0 * PI).contains(&s1.angle()));
        }
    }
}
