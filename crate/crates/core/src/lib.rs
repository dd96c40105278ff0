//! Bell-test simulation with counterfactual-outcome tables.
//!
//! A run draws a source token per trial, evaluates a hidden-variable model
//! at two stations and records either the measured pair (`actual` mode) or
//! the full four-setting outcome profile (`counterfactual` mode). The
//! `tables` module regroups counterfactual rows by source token; `stats`
//! evaluates the CHSH combination and the equality-probability inequality
//! on measured data.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); exact
//! bookkeeping uses [`scalar::Exact`]. The aliases below fix the scalar.

pub mod cli;
pub mod domain;
pub mod harness;
pub mod json;
pub mod models;
pub mod scalar;
pub mod stats;
pub mod stream;
pub mod tables;

pub use domain::{
    CounterfactualRecord, Label, Outcome, Profile, SourceToken, Station, Term, TimeIndex,
    TrialRecord,
};
pub use harness::{Executor, Mode, Records, Schedule};
pub use models::{HiddenVariableModel, ModelKind, ModelSpec};
pub use scalar::{Exact, Real};
pub use stats::Verdict;

pub type Setting64 = domain::Setting<f64>;
pub type Setting32 = domain::Setting<f32>;
pub type SettingPair64 = domain::SettingPair<f64>;
pub type SettingPair32 = domain::SettingPair<f32>;
pub type AngleSet64 = domain::AngleSet<f64>;
pub type AngleSet32 = domain::AngleSet<f32>;
pub type RunConfig64 = harness::RunConfig<f64>;
pub type RunConfig32 = harness::RunConfig<f32>;
pub type RunArtifact64 = harness::RunArtifact<f64>;
pub type RunArtifact32 = harness::RunArtifact<f32>;
pub type CorrelationEstimate64 = stats::CorrelationEstimate<f64>;
pub type EqualityEstimate64 = stats::EqualityEstimate<f64>;
pub type InequalityReport64 = stats::InequalityReport<f64>;
pub type InequalityReport32 = stats::InequalityReport<f32>;
pub type RunAnalysis64 = stats::RunAnalysis<f64>;
pub type RunAnalysis32 = stats::RunAnalysis<f32>;
pub type Model64 = Box<dyn models::HiddenVariableModel<f64>>;
pub type Model32 = Box<dyn models::HiddenVariableModel<f32>>;
