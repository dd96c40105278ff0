//! Run orchestration and record persistence.
//!
//! Each trial is an independent unit of work. Its source token is drawn
//! first, from a stream the settings never touch; the two settings are then
//! drawn from their own streams, and only then is the outcome pair
//! evaluated. Trials run in parallel and are assembled in trial order, so an
//! artifact is a pure function of its [`RunConfig`].
//!
//! Artifacts are newline-delimited JSON: one header object carrying the
//! schema version, the configuration and a provenance block, then one record
//! per line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AngleSet, CounterfactualRecord, DomainError, Label, SourceToken, Term, TimeIndex, TrialRecord,
};
use crate::models::{HiddenVariableModel, ModelError, ModelSpec, PairStreams};
use crate::scalar::Real;
use crate::stream::{StreamKey, StreamRole, MAX_TRIAL_ID};

pub const SCHEMA_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u64 },
    #[error("artifact declares {expected} trials but holds {found} records")]
    RecordCount { expected: u64, found: u64 },
    #[error("record {trial} is out of tick order")]
    Order { trial: u64 },
    #[error("operation requires {expected:?} mode")]
    WrongMode { expected: Mode },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Actual,
    Counterfactual,
}

/// How each trial's setting pair is chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Each station picks each of its two settings with probability 1/2.
    Uniform,
    /// Trial `i` uses `sequence[i % len]`.
    FixedSequence(Vec<Term>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
pub struct RunConfig<T: Real = f64> {
    pub model: ModelSpec,
    pub n_trials: u64,
    pub angles: AngleSet<T>,
    pub mode: Mode,
    pub master_seed: u64,
    pub schedule: Schedule,
    pub window_size: u64,
}

impl<T: Real> RunConfig<T> {
    pub fn new(model: ModelSpec, n_trials: u64, mode: Mode, master_seed: u64) -> Self {
        Self {
            model,
            n_trials,
            angles: AngleSet::default(),
            mode,
            master_seed,
            schedule: Schedule::Uniform,
            window_size: 1,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate()?;
        if self.n_trials == 0 {
            return Err(HarnessError::Config("n_trials must be at least 1".into()));
        }
        if self.n_trials - 1 > MAX_TRIAL_ID {
            return Err(HarnessError::Config(format!(
                "n_trials must not exceed {}",
                MAX_TRIAL_ID + 1
            )));
        }
        if self.window_size == 0 {
            return Err(HarnessError::Config("window_size must be at least 1".into()));
        }
        if let Schedule::FixedSequence(seq) = &self.schedule {
            if seq.is_empty() {
                return Err(HarnessError::Config("fixed sequence is empty".into()));
            }
        }
        self.angles.normalized()?;
        Ok(())
    }

    /// Copy with angles normalized into `[0, 2π)`.
    fn normalized(&self) -> Result<Self, HarnessError> {
        self.validate()?;
        Ok(Self {
            angles: self.angles.normalized()?,
            ..self.clone()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: String,
    pub seed: u64,
    /// Left empty by the engine so that artifacts stay reproducible.
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Records {
    Actual(Vec<TrialRecord>),
    Counterfactual(Vec<CounterfactualRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Actual(r) => r.len(),
            Records::Counterfactual(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifact<T: Real = f64> {
    pub config: RunConfig<T>,
    pub provenance: Provenance,
    pub records: Records,
}

impl<T: Real> RunArtifact<T> {
    fn new(config: RunConfig<T>, records: Records) -> Self {
        Self {
            provenance: Provenance {
                engine_version: ENGINE_VERSION.to_string(),
                seed: config.master_seed,
                timestamp: None,
            },
            config,
            records,
        }
    }

    pub fn actual(&self) -> Result<&[TrialRecord], HarnessError> {
        match &self.records {
            Records::Actual(r) => Ok(r),
            Records::Counterfactual(_) => Err(HarnessError::WrongMode {
                expected: Mode::Actual,
            }),
        }
    }

    pub fn counterfactual(&self) -> Result<&[CounterfactualRecord], HarnessError> {
        match &self.records {
            Records::Counterfactual(r) => Ok(r),
            Records::Actual(_) => Err(HarnessError::WrongMode {
                expected: Mode::Counterfactual,
            }),
        }
    }
}

/// Worker pool selection. `None` uses the ambient rayon pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Executor {
    pub workers: Option<usize>,
}

impl Executor {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
        }
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| HarnessError::Pool(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Setting pair for one trial. Uses only the two setting streams.
pub fn choose_pair(schedule: &Schedule, key: &StreamKey, trial: u64) -> Term {
    match schedule {
        Schedule::Uniform => {
            let s1 = if key.stream(trial, StreamRole::Setting1).random_bool(0.5) {
                Label::A
            } else {
                Label::D
            };
            let s2 = if key.stream(trial, StreamRole::Setting2).random_bool(0.5) {
                Label::B
            } else {
                Label::C
            };
            Term::from_labels(s1, s2).expect("one label per station")
        }
        Schedule::FixedSequence(seq) => seq[(trial % seq.len() as u64) as usize],
    }
}

fn source_for<T: Real>(model: &dyn HiddenVariableModel<T>, key: &StreamKey, trial: u64) -> SourceToken {
    model.sample_source(&mut key.stream(trial, StreamRole::Source))
}

fn actual_trial<T: Real>(
    model: &dyn HiddenVariableModel<T>,
    config: &RunConfig<T>,
    key: &StreamKey,
    trial: u64,
) -> Result<TrialRecord, ModelError> {
    let tick = TimeIndex(trial);
    // Emission precedes the choice of settings.
    let source = source_for(model, key, trial);
    let pair = choose_pair(&config.schedule, key, trial);
    let mut streams = PairStreams::from_key(key, trial);
    let (x, y) = model.evaluate_pair(&config.angles.pair(pair), source, tick, &mut streams)?;
    Ok(TrialRecord {
        trial,
        tick,
        pair,
        x,
        y,
        source: Some(source),
    })
}

fn counterfactual_trial<T: Real>(
    model: &dyn HiddenVariableModel<T>,
    angles: &AngleSet<T>,
    key: &StreamKey,
    trial: u64,
    source: SourceToken,
) -> CounterfactualRecord {
    let tick = TimeIndex(trial);
    let streams = PairStreams::from_key(key, trial);
    match model.counterfactual_profile(angles, source, tick, &streams) {
        Some(profile) => CounterfactualRecord::Definite {
            trial,
            tick,
            source,
            profile,
        },
        None => CounterfactualRecord::Unsupported { trial },
    }
}

pub fn run_actual<T: Real>(config: &RunConfig<T>) -> Result<RunArtifact<T>, HarnessError> {
    if config.mode != Mode::Actual {
        return Err(HarnessError::WrongMode {
            expected: Mode::Actual,
        });
    }
    let config = config.normalized()?;
    let model = config.model.build(&config.angles)?;
    let key = StreamKey::new(config.master_seed);
    let records = (0..config.n_trials)
        .into_par_iter()
        .map(|trial| actual_trial(model.as_ref(), &config, &key, trial))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunArtifact::new(config, Records::Actual(records)))
}

pub fn run_counterfactual<T: Real>(config: &RunConfig<T>) -> Result<RunArtifact<T>, HarnessError> {
    if config.mode != Mode::Counterfactual {
        return Err(HarnessError::WrongMode {
            expected: Mode::Counterfactual,
        });
    }
    let config = config.normalized()?;
    let model = config.model.build(&config.angles)?;
    let key = StreamKey::new(config.master_seed);
    let records = (0..config.n_trials)
        .into_par_iter()
        .map(|trial| {
            let source = source_for(model.as_ref(), &key, trial);
            counterfactual_trial(model.as_ref(), &config.angles, &key, trial, source)
        })
        .collect();
    Ok(RunArtifact::new(config, Records::Counterfactual(records)))
}

/// Dispatch on `config.mode`.
pub fn run<T: Real>(config: &RunConfig<T>) -> Result<RunArtifact<T>, HarnessError> {
    match config.mode {
        Mode::Actual => run_actual(config),
        Mode::Counterfactual => run_counterfactual(config),
    }
}

pub fn run_on<T: Real>(config: &RunConfig<T>, executor: &Executor) -> Result<RunArtifact<T>, HarnessError> {
    executor.install(|| run(config))?
}

/// Potential profiles for one fixed token at ticks `0..ticks`, as if that
/// token had been emitted at every tick.
pub fn sweep_token<T: Real>(
    config: &RunConfig<T>,
    token: SourceToken,
    ticks: u64,
) -> Result<Vec<CounterfactualRecord>, HarnessError> {
    let config = config.normalized()?;
    let model = config.model.build(&config.angles)?;
    SourceToken::new(token.0, config.model.alphabet)?;
    let key = StreamKey::new(config.master_seed);
    Ok((0..ticks)
        .into_par_iter()
        .map(|tick| counterfactual_trial(model.as_ref(), &config.angles, &key, tick, token))
        .collect())
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(deny_unknown_fields)]
struct Header<T: Real> {
    schema: u32,
    config: RunConfig<T>,
    provenance: Provenance,
}

#[derive(Serialize)]
#[serde(bound = "")]
struct HeaderRef<'a, T: Real> {
    schema: u32,
    config: &'a RunConfig<T>,
    provenance: &'a Provenance,
}

fn json_line<W: Write, V: Serialize>(w: &mut W, v: &V) -> io::Result<()> {
    serde_json::to_writer(&mut *w, v).map_err(io::Error::other)?;
    w.write_all(b"\n")
}

pub fn write_artifact<T: Real, W: Write>(artifact: &RunArtifact<T>, w: W) -> io::Result<()> {
    let mut w = BufWriter::with_capacity(1 << 20, w);
    json_line(
        &mut w,
        &HeaderRef {
            schema: SCHEMA_VERSION,
            config: &artifact.config,
            provenance: &artifact.provenance,
        },
    )?;
    match &artifact.records {
        Records::Actual(rs) => rs.iter().try_for_each(|r| json_line(&mut w, r))?,
        Records::Counterfactual(rs) => rs.iter().try_for_each(|r| json_line(&mut w, r))?,
    }
    w.flush()
}

pub fn persist<T: Real>(artifact: &RunArtifact<T>, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    write_artifact(artifact, File::create(path)?)?;
    Ok(())
}

fn schema_err(line: usize, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Schema {
        line,
        message: e.to_string(),
    }
}

pub fn read_artifact<T: Real, R: Read>(r: R) -> Result<RunArtifact<T>, HarnessError> {
    let mut lines = BufReader::with_capacity(1 << 20, r).lines();
    let first = lines.next().ok_or_else(|| schema_err(1, "missing header line"))??;
    let probe: serde_json::Value = serde_json::from_str(&first).map_err(|e| schema_err(1, e))?;
    match probe.get("schema").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(found) => return Err(HarnessError::SchemaVersion { found }),
        None => return Err(schema_err(1, "header lacks a schema version")),
    }
    let header: Header<T> = serde_json::from_value(probe).map_err(|e| schema_err(1, e))?;
    let config = header.config;
    config.model.validate()?;

    fn parse_all<R: BufRead, V: for<'de> Deserialize<'de>>(
        lines: io::Lines<R>,
    ) -> Result<Vec<V>, HarnessError> {
        let mut out = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            out.push(serde_json::from_str(&line).map_err(|e| schema_err(i + 2, e))?);
        }
        Ok(out)
    }

    let records = match config.mode {
        Mode::Actual => {
            let rs: Vec<TrialRecord> = parse_all(lines)?;
            check_order(rs.iter().map(|r| (r.trial, r.tick)))?;
            Records::Actual(rs)
        }
        Mode::Counterfactual => {
            let rs: Vec<CounterfactualRecord> = parse_all(lines)?;
            check_order(rs.iter().map(|r| (r.trial(), r.tick())))?;
            Records::Counterfactual(rs)
        }
    };
    if records.len() as u64 != config.n_trials {
        return Err(HarnessError::RecordCount {
            expected: config.n_trials,
            found: records.len() as u64,
        });
    }
    Ok(RunArtifact {
        config,
        provenance: header.provenance,
        records,
    })
}

fn check_order(items: impl Iterator<Item = (u64, TimeIndex)>) -> Result<(), HarnessError> {
    let mut prev: Option<TimeIndex> = None;
    for (trial, tick) in items {
        if prev.is_some_and(|p| tick <= p) {
            return Err(HarnessError::Order { trial });
        }
        prev = Some(tick);
    }
    Ok(())
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<RunArtifact<T>, HarnessError> {
    read_artifact(File::open(path)?)
}

/// Flat CSV view of the records. Drops the header and provenance.
pub fn export_csv<T: Real, W: Write>(artifact: &RunArtifact<T>, w: W) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| HarnessError::Io(io::Error::other(e));
    match &artifact.records {
        Records::Actual(rs) => {
            out.write_record(["trial", "tick", "pair", "x", "y", "lambda"]).map_err(csv_err)?;
            for r in rs {
                out.write_record([
                    r.trial.to_string(),
                    r.tick.0.to_string(),
                    r.pair.code().to_string(),
                    r.x.value().to_string(),
                    r.y.value().to_string(),
                    r.source.map(|s| s.0.to_string()).unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
        Records::Counterfactual(rs) => {
            out.write_record(["trial", "tick", "lambda", "A_a", "A_d", "B_b", "B_c"])
                .map_err(csv_err)?;
            for r in rs {
                let row = match r {
                    CounterfactualRecord::Definite {
                        trial,
                        tick,
                        source,
                        profile,
                    } => [
                        trial.to_string(),
                        tick.0.to_string(),
                        source.0.to_string(),
                        profile.a.value().to_string(),
                        profile.d.value().to_string(),
                        profile.b.value().to_string(),
                        profile.c.value().to_string(),
                    ],
                    CounterfactualRecord::Unsupported { trial } => {
                        let mut row: [String; 7] = Default::default();
                        row[0] = trial.to_string();
                        row[1] = trial.to_string();
                        row
                    }
                };
                out.write_record(row).map_err(csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn cfg(kind: ModelKind, n: u64, mode: Mode) -> RunConfig<f64> {
        RunConfig::new(ModelSpec::new(kind), n, mode, 7)
    }

    #[test]
    fn fixed_sequence_is_echoed() {
        let mut c = cfg(ModelKind::BellLocal, 4, Mode::Actual);
        c.schedule = Schedule::FixedSequence(Term::ALL.to_vec());
        let a = run_actual(&c).unwrap();
        let pairs: Vec<_> = a.actual().unwrap().iter().map(|r| r.pair).collect();
        assert_eq!(pairs, Term::ALL.to_vec());
    }

    #[test]
    fn ticks_follow_trial_ids() {
        let a = run_actual(&cfg(ModelKind::QuantumSinglet, 50, Mode::Actual)).unwrap();
        for (i, r) in a.actual().unwrap().iter().enumerate() {
            assert_eq!(r.trial, i as u64);
            assert_eq!(r.tick, TimeIndex(i as u64));
        }
        assert_eq!(a.provenance.seed, 7);
    }

    #[test]
    fn config_errors() {
        assert!(run_actual(&cfg(ModelKind::BellLocal, 0, Mode::Actual)).is_err());
        assert!(run_actual(&cfg(ModelKind::BellLocal, 5, Mode::Counterfactual)).is_err());
        let mut c = cfg(ModelKind::BellLocal, 5, Mode::Actual);
        c.angles.b = f64::NAN;
        assert!(matches!(run_actual(&c), Err(HarnessError::Domain(_))));
        let mut c = cfg(ModelKind::BellLocal, 5, Mode::Actual);
        c.schedule = Schedule::FixedSequence(vec![]);
        assert!(matches!(run_actual(&c), Err(HarnessError::Config(_))));
    }

    #[test]
    fn config_json_shape() {
        let c = cfg(ModelKind::BellLocal, 3, Mode::Actual);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.starts_with(
            r#"{"model":{"name":"bell-local","alphabet":64,"period":16},"n_trials":3,"angles":{"a":0.0000000000000000,"d":1.5707963267948966,"#
        ), "{text}");
        let back: RunConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn small_round_trip_and_truncation() {
        let a = run_actual(&cfg(ModelKind::BellLocal, 10, Mode::Actual)).unwrap();
        let mut buf = Vec::new();
        write_artifact(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"schema":1,"config":{"#));
        assert_eq!(text.lines().count(), 11);
        assert_eq!(read_artifact::<f64, _>(&buf[..]).unwrap(), a);

        let cut = &buf[..buf.len() - 7];
        assert!(matches!(
            read_artifact::<f64, _>(cut),
            Err(HarnessError::Schema { .. })
        ));
        let lines: Vec<&str> = text.lines().collect();
        let dropped = lines[..lines.len() - 1].join("\n");
        assert!(matches!(
            read_artifact::<f64, _>(dropped.as_bytes()),
            Err(HarnessError::RecordCount { expected: 10, found: 9 })
        ));
        let bumped = text.replacen(r#"{"schema":1"#, r#"{"schema":2"#, 1);
        assert!(matches!(
            read_artifact::<f64, _>(bumped.as_bytes()),
            Err(HarnessError::SchemaVersion { found: 2 })
        ));
        assert!(read_artifact::<f64, _>(&b""[..]).is_err());
    }

    #[test]
    fn counterfactual_round_trip_with_unsupported() {
        for kind in [ModelKind::BellLocal, ModelKind::QuantumSinglet] {
            let a = run_counterfactual(&cfg(kind, 10, Mode::Counterfactual)).unwrap();
            let mut buf = Vec::new();
            write_artifact(&a, &mut buf).unwrap();
            assert_eq!(read_artifact::<f64, _>(&buf[..]).unwrap(), a);
        }
    }

    #[test]
    fn csv_view() {
        let a = run_actual(&cfg(ModelKind::BellLocal, 3, Mode::Actual)).unwrap();
        let mut buf = Vec::new();
        export_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "trial,tick,pair,x,y,lambda");
        assert_eq!(text.lines().count(), 4);
        let c = run_counterfactual(&cfg(ModelKind::QuantumSinglet, 2, Mode::Counterfactual)).unwrap();
        let mut buf = Vec::new();
        export_csv(&c, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\n1,1,,,,,\n"));
    }

    #[test]
    fn sweep_fixes_the_token() {
        let c = cfg(ModelKind::TimeDependentLocal, 1, Mode::Counterfactual);
        let recs = sweep_token(&c, SourceToken(7), 100).unwrap();
        assert_eq!(recs.len(), 100);
        assert!(recs.iter().all(|r| matches!(r, CounterfactualRecord::Definite { source: SourceToken(7), .. })));
        assert!(sweep_token(&c, SourceToken(64), 1).is_err());
    }
}
