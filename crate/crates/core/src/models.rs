//! Hidden-variable model catalog.
//!
//! Every model samples a source token without seeing any setting, then turns
//! `(setting, token, tick, local randomness)` into a ±1 outcome. Local models
//! evaluate each station on its own; nonlocal models only expose a joint
//! evaluation over an actual setting pair.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AngleSet, DomainError, Label, Outcome, Profile, Setting, SettingPair, SourceToken, Station,
    TimeIndex,
};
use crate::scalar::Real;
use crate::stream::{mix64, StreamKey, StreamRole, TrialStream};

pub const DEFAULT_ALPHABET: u32 = 64;
pub const DEFAULT_PERIOD: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model {model} is nonlocal and only supports joint pair evaluation")]
    RequiresJointEvaluation { model: &'static str },
    #[error("setting {label} is not a station {station:?} setting")]
    WrongStation { label: Label, station: Station },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("lambda alphabet must be at least 1")]
    EmptyAlphabet,
    #[error("instrument period must be at least 1")]
    ZeroPeriod,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalityClass {
    EinsteinLocal,
    EinsteinLocalTimeDependent,
    Nonlocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: &'static str,
    pub locality_class: LocalityClass,
    pub counterfactually_definite: bool,
    pub lambda_alphabet_size: u32,
}

impl ModelDescriptor {
    pub fn is_local(&self) -> bool {
        self.locality_class != LocalityClass::Nonlocal
    }
}

/// Per-trial streams available to outcome evaluation.
#[derive(Clone, Debug)]
pub struct PairStreams {
    pub station1: TrialStream,
    pub station2: TrialStream,
    pub joint: TrialStream,
}

impl PairStreams {
    pub fn derive(master_seed: u64, trial_id: u64) -> Self {
        Self::from_key(&StreamKey::new(master_seed), trial_id)
    }

    pub fn from_key(key: &StreamKey, trial_id: u64) -> Self {
        Self {
            station1: key.stream(trial_id, StreamRole::Instrument1),
            station2: key.stream(trial_id, StreamRole::Instrument2),
            joint: key.stream(trial_id, StreamRole::Joint),
        }
    }

    pub fn station(&mut self, station: Station) -> &mut TrialStream {
        match station {
            Station::S1 => &mut self.station1,
            Station::S2 => &mut self.station2,
        }
    }
}

/// Uniform interface over the model catalog.
pub trait HiddenVariableModel<T: Real>: Send + Sync {
    fn descriptor(&self) -> ModelDescriptor;

    /// Draw Λ from ρ. Takes no setting argument: the source cannot know which
    /// settings will be chosen.
    fn sample_source(&self, stream: &mut TrialStream) -> SourceToken {
        let m = self.descriptor().lambda_alphabet_size;
        SourceToken(stream.random_range(0..m))
    }

    /// Single-station outcome for local models.
    fn evaluate_station(
        &self,
        station: Station,
        setting: &Setting<T>,
        source: SourceToken,
        tick: TimeIndex,
        stream: &mut TrialStream,
    ) -> Result<Outcome, ModelError>;

    /// Outcome pair for an actual setting pair. Local models evaluate the two
    /// stations independently, each with its own instrument stream.
    fn evaluate_pair(
        &self,
        pair: &SettingPair<T>,
        source: SourceToken,
        tick: TimeIndex,
        streams: &mut PairStreams,
    ) -> Result<(Outcome, Outcome), ModelError> {
        let x = self.evaluate_station(Station::S1, pair.s1(), source, tick, &mut streams.station1)?;
        let y = self.evaluate_station(Station::S2, pair.s2(), source, tick, &mut streams.station2)?;
        Ok((x, y))
    }

    /// All four potential values at one `(source, tick)`, or `None` when the
    /// model is not counterfactually definite. Each value is evaluated on a
    /// fresh copy of its station's stream, so it matches what
    /// [`evaluate_pair`](Self::evaluate_pair) would record for that setting.
    fn counterfactual_profile(
        &self,
        angles: &AngleSet<T>,
        source: SourceToken,
        tick: TimeIndex,
        streams: &PairStreams,
    ) -> Option<Profile> {
        if !self.descriptor().counterfactually_definite {
            return None;
        }
        let value = |label: Label| {
            let station = label.station();
            let mut s = match station {
                Station::S1 => streams.station1.clone(),
                Station::S2 => streams.station2.clone(),
            };
            self.evaluate_station(station, &angles.setting(label), source, tick, &mut s)
                .ok()
        };
        Some(Profile {
            a: value(Label::A)?,
            d: value(Label::D)?,
            b: value(Label::B)?,
            c: value(Label::C)?,
        })
    }

    /// Closed-form E(x·y) for a pair, where the model has one.
    fn theoretical_correlation(&self, _pair: &SettingPair<T>) -> Option<T> {
        None
    }
}

fn check_station<T: Real>(station: Station, setting: &Setting<T>) -> Result<(), ModelError> {
    if setting.station() != station {
        return Err(ModelError::WrongStation {
            label: setting.label,
            station,
        });
    }
    Ok(())
}

/// Source direction of token `k`: the centre of bin `k` of `m` equal bins.
pub fn token_direction<T: Real>(token: SourceToken, alphabet: u32) -> T {
    T::TAU() * (T::lit(token.0 as f64) + T::lit(0.5)) / T::lit(alphabet as f64)
}

/// `sign(cos(phi - alpha))` with `sign(0) = +1`.
fn circle_sign<T: Real>(phi: T, alpha: T) -> Outcome {
    Outcome::from_sign((phi - alpha).cos() >= T::zero())
}

fn circle_outcome<T: Real>(station: Station, phi: T, alpha: T) -> Outcome {
    match station {
        Station::S1 => circle_sign(phi, alpha),
        Station::S2 => -circle_sign(phi, alpha),
    }
}

/// `-(1 - 2θ/π)` for the sign-on-circle model.
fn circle_correlation<T: Real>(pair: &SettingPair<T>) -> T {
    -(T::one() - T::lit(2.0) * pair.separation() / T::PI())
}

/// Textbook time-free local model: Λ is a direction on the circle,
/// `A = sign cos(φ - α)`, `B = -sign cos(φ - β)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellLocal {
    pub alphabet: u32,
}

impl<T: Real> HiddenVariableModel<T> for BellLocal {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            name: ModelKind::BellLocal.name(),
            locality_class: LocalityClass::EinsteinLocal,
            counterfactually_definite: true,
            lambda_alphabet_size: self.alphabet,
        }
    }

    fn evaluate_station(
        &self,
        station: Station,
        setting: &Setting<T>,
        source: SourceToken,
        _tick: TimeIndex,
        _stream: &mut TrialStream,
    ) -> Result<Outcome, ModelError> {
        check_station(station, setting)?;
        let phi = token_direction::<T>(source, self.alphabet);
        Ok(circle_outcome(station, phi, setting.angle()))
    }

    fn theoretical_correlation(&self, pair: &SettingPair<T>) -> Option<T> {
        Some(circle_correlation(pair))
    }
}

/// Local model with periodic, setting- and time-dependent instrument
/// parameters. Each station flips the circle outcome by the parity of an
/// instrument token keyed on `(analyzer angle, tick mod period)`. Both
/// stations use the same key function, so equal angles flip together and
/// equal-angle anticorrelation survives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeDependentLocal {
    pub alphabet: u32,
    pub period: u64,
}

impl TimeDependentLocal {
    /// Instrument token for one station; depends only on local data.
    pub fn instrument_token<T: Real>(&self, angle: T, tick: TimeIndex) -> u64 {
        let key = (angle.as_f64() / std::f64::consts::TAU * (1u64 << 32) as f64).round() as u64;
        mix64(key ^ mix64((tick.0 % self.period).wrapping_add(0x005E_ED0F_71CC)))
    }

    pub fn flip<T: Real>(&self, angle: T, tick: TimeIndex) -> Outcome {
        Outcome::from_sign(self.instrument_token(angle, tick) & 1 == 0)
    }
}

impl<T: Real> HiddenVariableModel<T> for TimeDependentLocal {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            name: ModelKind::TimeDependentLocal.name(),
            locality_class: LocalityClass::EinsteinLocalTimeDependent,
            counterfactually_definite: true,
            lambda_alphabet_size: self.alphabet,
        }
    }

    fn evaluate_station(
        &self,
        station: Station,
        setting: &Setting<T>,
        source: SourceToken,
        tick: TimeIndex,
        _stream: &mut TrialStream,
    ) -> Result<Outcome, ModelError> {
        check_station(station, setting)?;
        let phi = token_direction::<T>(source, self.alphabet);
        let base = circle_outcome(station, phi, setting.angle());
        Ok(base * self.flip(setting.angle(), tick))
    }
}

/// Quantum-singlet reference, sampled jointly from both actual settings:
/// `x` is a fair coin and `y = x` with probability `(1 - cos θ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantumSinglet {
    pub alphabet: u32,
}

impl<T: Real> HiddenVariableModel<T> for QuantumSinglet {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            name: ModelKind::QuantumSinglet.name(),
            locality_class: LocalityClass::Nonlocal,
            counterfactually_definite: false,
            lambda_alphabet_size: self.alphabet,
        }
    }

    fn evaluate_station(
        &self,
        _station: Station,
        _setting: &Setting<T>,
        _source: SourceToken,
        _tick: TimeIndex,
        _stream: &mut TrialStream,
    ) -> Result<Outcome, ModelError> {
        Err(ModelError::RequiresJointEvaluation {
            model: ModelKind::QuantumSinglet.name(),
        })
    }

    fn evaluate_pair(
        &self,
        pair: &SettingPair<T>,
        _source: SourceToken,
        _tick: TimeIndex,
        streams: &mut PairStreams,
    ) -> Result<(Outcome, Outcome), ModelError> {
        let x = Outcome::from_sign(streams.joint.random_bool(0.5));
        let p_same = ((T::one() - pair.separation().cos()) / T::lit(2.0)).as_f64();
        let u: f64 = streams.joint.random();
        let y = if u < p_same { x } else { -x };
        Ok((x, y))
    }

    fn theoretical_correlation(&self, pair: &SettingPair<T>) -> Option<T> {
        Some(-pair.separation().cos())
    }
}

/// Negative control: every potential value depends on all four potential
/// settings at once, via a common source rotation. Nonlocal, yet
/// counterfactually definite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlocalAllSettings<T: Real = f64> {
    pub alphabet: u32,
    pub angles: AngleSet<T>,
}

impl<T: Real> NonlocalAllSettings<T> {
    pub fn rotation(&self) -> T {
        let sum = self.angles.a + self.angles.d + self.angles.b + self.angles.c;
        sum - T::TAU() * (sum / T::TAU()).floor()
    }

    fn value(&self, station: Station, setting: &Setting<T>, source: SourceToken) -> Outcome {
        let phi = token_direction::<T>(source, self.alphabet) + self.rotation();
        circle_outcome(station, phi, setting.angle())
    }
}

impl<T: Real> HiddenVariableModel<T> for NonlocalAllSettings<T> {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            name: ModelKind::NonlocalAllSettings.name(),
            locality_class: LocalityClass::Nonlocal,
            counterfactually_definite: true,
            lambda_alphabet_size: self.alphabet,
        }
    }

    fn evaluate_station(
        &self,
        _station: Station,
        _setting: &Setting<T>,
        _source: SourceToken,
        _tick: TimeIndex,
        _stream: &mut TrialStream,
    ) -> Result<Outcome, ModelError> {
        Err(ModelError::RequiresJointEvaluation {
            model: ModelKind::NonlocalAllSettings.name(),
        })
    }

    fn evaluate_pair(
        &self,
        pair: &SettingPair<T>,
        source: SourceToken,
        _tick: TimeIndex,
        _streams: &mut PairStreams,
    ) -> Result<(Outcome, Outcome), ModelError> {
        Ok((
            self.value(Station::S1, pair.s1(), source),
            self.value(Station::S2, pair.s2(), source),
        ))
    }

    fn counterfactual_profile(
        &self,
        angles: &AngleSet<T>,
        source: SourceToken,
        _tick: TimeIndex,
        _streams: &PairStreams,
    ) -> Option<Profile> {
        let v = |label: Label| self.value(label.station(), &angles.setting(label), source);
        Some(Profile {
            a: v(Label::A),
            d: v(Label::D),
            b: v(Label::B),
            c: v(Label::C),
        })
    }
}

/// Names accepted on the command line and in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BellLocal,
    TimeDependentLocal,
    QuantumSinglet,
    NonlocalAllSettings,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::BellLocal,
        ModelKind::TimeDependentLocal,
        ModelKind::QuantumSinglet,
        ModelKind::NonlocalAllSettings,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BellLocal => "bell-local",
            ModelKind::TimeDependentLocal => "time-dependent-local",
            ModelKind::QuantumSinglet => "quantum-singlet",
            ModelKind::NonlocalAllSettings => "nonlocal-all-settings",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// Serializable model choice plus its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelKind,
    pub alphabet: u32,
    pub period: u64,
}

impl ModelSpec {
    pub fn new(name: ModelKind) -> Self {
        Self {
            name,
            alphabet: DEFAULT_ALPHABET,
            period: DEFAULT_PERIOD,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.alphabet == 0 {
            return Err(ModelError::EmptyAlphabet);
        }
        if self.period == 0 {
            return Err(ModelError::ZeroPeriod);
        }
        Ok(())
    }

    /// Instantiate the model. `angles` is only consulted by models that see
    /// every potential setting.
    pub fn build<T: Real>(
        &self,
        angles: &AngleSet<T>,
    ) -> Result<Box<dyn HiddenVariableModel<T>>, ModelError> {
        self.validate()?;
        let alphabet = self.alphabet;
        Ok(match self.name {
            ModelKind::BellLocal => Box::new(BellLocal { alphabet }),
            ModelKind::TimeDependentLocal => Box::new(TimeDependentLocal {
                alphabet,
                period: self.period,
            }),
            ModelKind::QuantumSinglet => Box::new(QuantumSinglet { alphabet }),
            ModelKind::NonlocalAllSettings => Box::new(NonlocalAllSettings {
                alphabet,
                angles: angles.normalized()?,
            }),
        })
    }
}
