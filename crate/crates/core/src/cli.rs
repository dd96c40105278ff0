//! Command-line surface.
//!
//! Data goes to the output stream (or `--out`), diagnostics to the error
//! stream. Findings such as obstructions and inapplicable verdicts exit 0;
//! misuse exits 2, I/O failures 3, failed self-verification 1.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::domain::{AngleSet, Label, Outcome, SourceToken, Term};
use crate::harness::{
    self, export_csv, Executor, HarnessError, Mode, Records, RunArtifact, RunConfig, Schedule,
};
use crate::json::Fixed17;
use crate::models::{ModelKind, ModelSpec, DEFAULT_ALPHABET, DEFAULT_PERIOD};
use crate::stats::{self, indicator_combination, RunAnalysis, Verdict, DEFAULT_K};
use crate::tables::{
    self, build_potential_table_capped, build_time_indexed_table, count_ratio, reorder_by_lambda,
    GroupedSummary, GroupedTable, ObstructionKind, PotentialValueCount, ProofObstruction,
    Reordering, TableTotals, TimeIndexedTable, DEFAULT_WITNESS_CAP,
};

pub const OUTPUT_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "bellcheck", version, about = "Bell-test simulation, counterfactual tables and inequality analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write a JSONL artifact.
    Simulate(SimulateArgs),
    /// Build and reorder counterfactual tables from an artifact.
    Tables(TablesArgs),
    /// Evaluate CHSH and equality-probability inequalities on measured data.
    Analyze(AnalyzeArgs),
    /// Exhaustive and random-mixture self-verification.
    Verify(VerifyArgs),
    /// Merge analyses across runs into a comparison table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Actual,
    Counterfactual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[arg(long)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "actual")]
    pub mode: ModeArg,
    /// Analyzer angles in degrees, e.g. `a=0,d=90,b=45,c=135`.
    #[arg(long, value_parser = parse_angles, default_value = "a=0,d=90,b=45,c=135")]
    pub angles: AngleSet<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Size of the source-token alphabet.
    #[arg(long, default_value_t = DEFAULT_ALPHABET)]
    pub alphabet: u32,
    /// Instrument period for the time-dependent model.
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    pub period: u64,
    /// `uniform`, or a comma-separated pair sequence such as `ac,ab,db,dc`.
    #[arg(long, value_parser = parse_schedule, default_value = "uniform")]
    pub schedule: Schedule,
    /// Default analysis window, recorded in the artifact.
    #[arg(long, default_value_t = 1)]
    pub window: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write a CSV view of the records.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub time_sensitive: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WITNESS_CAP)]
    pub witness_cap: usize,
    /// Emit the time-indexed table for this token instead of regrouping.
    #[arg(long)]
    pub token: Option<u32>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Window size in ticks; defaults to the artifact's configured window.
    #[arg(long)]
    pub window: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Standard errors a violation must clear.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
    /// Write every per-window report as JSONL.
    #[arg(long)]
    pub windows_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    pub mixtures: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Analysis outputs, table outputs, or run artifacts.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: crate::models::ModelError| e.to_string())
}

pub fn parse_angles(s: &str) -> Result<AngleSet<f64>, String> {
    let mut angles = AngleSet::default();
    let mut seen = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected label=degrees, got {part:?}"))?;
        let label: Label = k.trim().parse().map_err(|e: crate::domain::DomainError| e.to_string())?;
        if seen.contains(&label) {
            return Err(format!("setting {label} given twice"));
        }
        seen.push(label);
        let deg: f64 = v.trim().parse().map_err(|_| format!("bad angle {v:?}"))?;
        if !deg.is_finite() {
            return Err(format!("angle for {label} must be finite"));
        }
        let rad = deg.to_radians();
        match label {
            Label::A => angles.a = rad,
            Label::D => angles.d = rad,
            Label::B => angles.b = rad,
            Label::C => angles.c = rad,
        }
    }
    angles.normalized().map_err(|e| e.to_string())
}

pub fn parse_schedule(s: &str) -> Result<Schedule, String> {
    if s == "uniform" {
        return Ok(Schedule::Uniform);
    }
    let seq = s
        .split(',')
        .map(|p| p.trim().parse::<Term>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Schedule::FixedSequence(seq))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Run one parsed command; returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out, err),
        Command::Tables(a) => tables_cmd(a, out, err),
        Command::Analyze(a) => analyze(a, out, err),
        Command::Verify(a) => verify_with(a, tables::row_delta, indicator_combination, out),
        Command::Report(a) => report(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn write_json<V: Serialize>(v: &V, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer(&mut w, v).map_err(|e| CliError::Io(e.to_string()))?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => {
            serde_json::to_writer(&mut *out, v).map_err(|e| CliError::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Human summaries go to stdout when data went to a file, else to stderr.
fn summary_sink<'a>(has_out: bool, out: &'a mut dyn Write, err: &'a mut dyn Write) -> &'a mut dyn Write {
    if has_out {
        out
    } else {
        err
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mode = match a.mode {
        ModeArg::Actual => Mode::Actual,
        ModeArg::Counterfactual => Mode::Counterfactual,
    };
    let config = RunConfig {
        model: ModelSpec {
            name: a.model,
            alphabet: a.alphabet,
            period: a.period,
        },
        n_trials: a.trials,
        angles: a.angles,
        mode,
        master_seed: a.seed,
        schedule: a.schedule,
        window_size: a.window,
    };
    let executor = Executor { workers: a.workers };
    let artifact = harness::run_on(&config, &executor)?;
    if let Records::Counterfactual(rs) = &artifact.records {
        let unsupported = rs.iter().filter(|r| !r.is_supported()).count();
        if unsupported > 0 {
            writeln!(
                err,
                "warning: model {} is not counterfactually definite; {unsupported} of {} records are unsupported",
                a.model,
                rs.len()
            )?;
        }
    }
    harness::persist(&artifact, &a.out)?;
    if let Some(csv) = &a.csv {
        export_csv(&artifact, File::create(csv)?)?;
    }
    writeln!(
        out,
        "simulated model={} n={} seed={} mode={} -> {}",
        a.model,
        artifact.config.n_trials,
        artifact.config.master_seed,
        match mode {
            Mode::Actual => "actual",
            Mode::Counterfactual => "counterfactual",
        },
        a.out.display()
    )?;
    Ok(())
}

fn load_artifact(path: &Path) -> Result<RunArtifact<f64>, CliError> {
    Ok(harness::load(path)?)
}

/// Identity of the run an output was derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunIdentity {
    pub model: ModelKind,
    pub seed: u64,
    pub n_trials: u64,
    pub mode: Mode,
}

impl RunIdentity {
    fn of(a: &RunArtifact<f64>) -> Self {
        Self {
            model: a.config.model.name,
            seed: a.config.master_seed,
            n_trials: a.config.n_trials,
            mode: a.config.mode,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TablesResult {
    Grouped(GroupedTable),
    Obstruction(ProofObstruction),
    TimeIndexed(TimeIndexedTable),
}

#[derive(Clone, Debug, Serialize)]
pub struct TablesOutput {
    pub schema: u32,
    pub kind: &'static str,
    pub run: RunIdentity,
    pub time_sensitive: bool,
    pub potential_values: u64,
    pub result: TablesResult,
}

/// Build the tables output for a counterfactual artifact.
pub fn tables_output(
    artifact: &RunArtifact<f64>,
    time_sensitive: bool,
    witness_cap: usize,
    token: Option<u32>,
) -> Result<TablesOutput, CliError> {
    let records = artifact
        .counterfactual()
        .map_err(|_| CliError::Usage("tables require counterfactual mode".into()))?;
    let result = match build_potential_table_capped(records, witness_cap) {
        Err(obstruction) => TablesResult::Obstruction(obstruction),
        Ok(table) => match token {
            Some(t) => {
                let t = SourceToken::new(t, artifact.config.model.alphabet)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                TablesResult::TimeIndexed(
                    build_time_indexed_table(records, t).expect("table already built"),
                )
            }
            None => match reorder_by_lambda(&table, time_sensitive, witness_cap)
                .map_err(|e| CliError::Verification(e.to_string()))?
            {
                Reordering::Grouped(g) => TablesResult::Grouped(g),
                Reordering::Obstructed(o) => TablesResult::Obstruction(o),
            },
        },
    };
    let potential_values = match &result {
        TablesResult::Grouped(g) => g.potential_values(),
        TablesResult::TimeIndexed(t) => t.potential_values(),
        TablesResult::Obstruction(o) if o.kind == ObstructionKind::TimeConflict => {
            4 * records.len() as u64
        }
        TablesResult::Obstruction(_) => 0,
    };
    Ok(TablesOutput {
        schema: OUTPUT_SCHEMA,
        kind: "tables",
        run: RunIdentity::of(artifact),
        time_sensitive,
        potential_values,
        result,
    })
}

fn histogram_line(t: &TableTotals) -> String {
    format!(
        "row sums {{+2: {}, -2: {}}}",
        t.row_sum_histogram.plus2, t.row_sum_histogram.minus2
    )
}

fn tables_cmd(a: TablesArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let artifact = load_artifact(&a.input)?;
    let output = tables_output(&artifact, a.time_sensitive, a.witness_cap, a.token)?;
    write_json(&output, a.out.as_deref(), out)?;
    let sink = summary_sink(a.out.is_some(), out, err);
    match &output.result {
        TablesResult::Grouped(g) => writeln!(
            sink,
            "grouped: {} groups, {} rows, {}, {} conflicts",
            g.group_count(),
            g.totals().rows,
            histogram_line(&g.totals()),
            g.conflicts
        )?,
        TablesResult::TimeIndexed(t) => writeln!(
            sink,
            "time-indexed: lambda={} {} rows, {}",
            t.lambda.0,
            t.rows.len(),
            histogram_line(&t.totals())
        )?,
        TablesResult::Obstruction(o) => writeln!(
            sink,
            "obstruction: {:?}, {} conflicts, {} witnesses",
            o.kind,
            o.total_conflicts,
            o.witnesses.len()
        )?,
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub schema: u32,
    pub kind: String,
    pub run: RunIdentity,
    pub angles: AngleSet<f64>,
    pub k: Fixed17,
    pub analysis: RunAnalysis<f64>,
}

pub fn analysis_output(
    artifact: &RunArtifact<f64>,
    window: Option<u64>,
    k: f64,
) -> Result<(AnalysisOutput, Vec<stats::WindowReport<f64>>), CliError> {
    let records = artifact
        .actual()
        .map_err(|_| CliError::Usage("analyze requires actual mode".into()))?;
    let window = window.unwrap_or(artifact.config.window_size);
    if window == 0 {
        return Err(CliError::Usage("--window must be at least 1".into()));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(CliError::Usage("--k must be a non-negative number".into()));
    }
    let (analysis, windows) = stats::analyze_run(records, window, k);
    Ok((
        AnalysisOutput {
            schema: OUTPUT_SCHEMA,
            kind: "analysis".into(),
            run: RunIdentity::of(artifact),
            angles: artifact.config.angles,
            k: Fixed17(k),
            analysis,
        },
        windows,
    ))
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Satisfied => "satisfied",
        Verdict::Violated => "violated",
        Verdict::Inapplicable => "inapplicable",
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let artifact = load_artifact(&a.input)?;
    let (output, windows) = analysis_output(&artifact, a.window, a.k)?;
    write_json(&output, a.out.as_deref(), out)?;
    if let Some(path) = &a.windows_out {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &windows {
            serde_json::to_writer(&mut w, r).map_err(|e| CliError::Io(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let an = &output.analysis;
    let sink = summary_sink(a.out.is_some(), out, err);
    writeln!(
        sink,
        "delta={} ({}) gwzz_lhs={} ({}) windows={} inapplicable={}",
        opt_num(an.delta.map(|d| d.delta)),
        verdict_str(an.chsh.verdict),
        opt_num(an.gwzz.lhs),
        verdict_str(an.gwzz.verdict),
        an.windows.windows,
        an.windows.inapplicable
    )?;
    Ok(())
}

/// `verify` with injectable evaluators, so a faulty build can be simulated.
pub fn verify_with<R, I>(a: VerifyArgs, row: R, indicator: I, out: &mut dyn Write) -> Result<(), CliError>
where
    R: Fn(Outcome, Outcome, Outcome, Outcome) -> i32,
    I: Fn([Outcome; 4]) -> i32,
{
    let rows = tables::verify_row_identity_with(row);
    let gpw = stats::verify_gpw_inequality_with(a.mixtures, a.seed, indicator);
    writeln!(
        out,
        "{}/{} quadruples ±2; {}/{} mixtures ≤ 0",
        rows.passed, rows.checked, gpw.mixtures_ok, gpw.mixtures
    )?;
    writeln!(
        out,
        "indicator atoms: max {} min {}; worst mixture lhs {}",
        gpw.atom_max,
        gpw.atom_min,
        gpw.worst_mixture_lhs
            .map(|w| format!("{:e}", w.0))
            .unwrap_or_else(|| "n/a".into())
    )?;
    let fmt_q = |q: &[Outcome; 4]| {
        let v: Vec<String> = q.iter().map(|o| format!("{:+}", o.value())).collect();
        format!("({})", v.join(","))
    };
    let mut failures = Vec::new();
    for q in &rows.failures {
        failures.push(format!("row identity fails for quadruple {}", fmt_q(q)));
    }
    for q in &gpw.atom_failures {
        failures.push(format!("indicator bound fails for quadruple {}", fmt_q(q)));
    }
    if gpw.mixtures_ok != gpw.mixtures {
        failures.push(format!(
            "{} mixtures exceed the bound",
            gpw.mixtures - gpw.mixtures_ok
        ));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

#[derive(Deserialize)]
struct Probe {
    schema: Option<u64>,
    kind: Option<String>,
}

#[derive(Deserialize)]
struct ObstructionSummary {
    kind: ObstructionKind,
    total_conflicts: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum TablesResultSummary {
    Grouped(GroupedSummary),
    Obstruction(ObstructionSummary),
    TimeIndexed(serde::de::IgnoredAny),
}

#[derive(Deserialize)]
struct TablesInput {
    run: RunIdentity,
    potential_values: u64,
    result: TablesResultSummary,
}

/// One row of the cross-run comparison.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReportRow {
    pub model: String,
    pub seed: u64,
    pub n_trials: u64,
    pub delta: Option<Fixed17>,
    pub delta_stderr: Option<Fixed17>,
    pub chsh_verdict: Option<Verdict>,
    pub gwzz_lhs: Option<Fixed17>,
    pub gwzz_verdict: Option<Verdict>,
    pub inapplicable_windows: Option<u64>,
    pub obstruction: Option<String>,
    pub potential_values: Option<u64>,
    pub measured_pairs: Option<u64>,
    pub element_count_ratio: Option<Fixed17>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub kind: &'static str,
    pub rows: Vec<ReportRow>,
}

type RowKey = (String, u64, u64);

fn row_for<'a>(rows: &'a mut BTreeMap<RowKey, ReportRow>, run: &RunIdentity) -> &'a mut ReportRow {
    let key = (run.model.name().to_string(), run.seed, run.n_trials);
    rows.entry(key).or_insert_with(|| ReportRow {
        model: run.model.name().to_string(),
        seed: run.seed,
        n_trials: run.n_trials,
        ..Default::default()
    })
}

fn absorb_analysis(rows: &mut BTreeMap<RowKey, ReportRow>, a: &AnalysisOutput) {
    let row = row_for(rows, &a.run);
    let an = &a.analysis;
    row.delta = an.delta.map(|d| Fixed17(d.delta));
    row.delta_stderr = an.delta.map(|d| Fixed17(d.stderr));
    row.chsh_verdict = Some(an.chsh.verdict);
    row.gwzz_lhs = an.gwzz.lhs.map(Fixed17);
    row.gwzz_verdict = Some(an.gwzz.verdict);
    row.inapplicable_windows = Some(an.windows.inapplicable);
    row.measured_pairs = Some(an.n_trials);
}

fn absorb_tables(rows: &mut BTreeMap<RowKey, ReportRow>, t: &TablesInput) {
    let row = row_for(rows, &t.run);
    row.potential_values = Some(t.potential_values);
    row.obstruction = Some(match &t.result {
        TablesResultSummary::Grouped(g) => format!(
            "none ({} groups, {} rows, {} conflicts)",
            g.group_count, g.totals.rows, g.conflicts
        ),
        TablesResultSummary::Obstruction(o) => {
            let kind = match o.kind {
                ObstructionKind::TimeConflict => "time_conflict",
                ObstructionKind::NotCounterfactuallyDefinite => "not_counterfactually_definite",
            };
            format!("{kind} ({} conflicts)", o.total_conflicts)
        }
        TablesResultSummary::TimeIndexed(_) => "time-indexed table".to_string(),
    });
}

fn check_schema(path: &Path, schema: Option<u64>) -> Result<(), CliError> {
    match schema {
        Some(s) if s == OUTPUT_SCHEMA as u64 => Ok(()),
        other => Err(CliError::Usage(format!(
            "{}: schema mismatch (found {:?}, expected {OUTPUT_SCHEMA})",
            path.display(),
            other
        ))),
    }
}

/// Build the comparison report from analysis outputs, table outputs and raw
/// artifacts. Artifacts are analyzed (actual mode) or tabulated with time
/// sensitivity (counterfactual mode) on the fly.
pub fn build_report(inputs: &[PathBuf], k: f64) -> Result<Report, CliError> {
    let mut rows: BTreeMap<RowKey, ReportRow> = BTreeMap::new();
    for path in inputs {
        let text = fs::read_to_string(path)?;
        let first = text.lines().next().unwrap_or("");
        let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", path.display()));
        let probe: Probe = serde_json::from_str(first).map_err(bad)?;
        match probe.kind.as_deref() {
            Some("analysis") => {
                check_schema(path, probe.schema)?;
                let a: AnalysisOutput = serde_json::from_str(&text).map_err(bad)?;
                absorb_analysis(&mut rows, &a);
            }
            Some("tables") => {
                check_schema(path, probe.schema)?;
                let t: TablesInput = serde_json::from_str(&text).map_err(bad)?;
                absorb_tables(&mut rows, &t);
            }
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "{}: cannot report on {other:?} output",
                    path.display()
                )))
            }
            None => {
                let artifact: RunArtifact<f64> = harness::read_artifact(text.as_bytes())?;
                match artifact.config.mode {
                    Mode::Actual => {
                        let (a, _) = analysis_output(&artifact, None, k)?;
                        absorb_analysis(&mut rows, &a);
                    }
                    Mode::Counterfactual => {
                        let t = tables_output(&artifact, true, DEFAULT_WITNESS_CAP, None)?;
                        let summary: TablesInput = serde_json::from_str(
                            &serde_json::to_string(&t).map_err(bad)?,
                        )
                        .map_err(bad)?;
                        absorb_tables(&mut rows, &summary);
                    }
                }
            }
        }
    }
    let rows = rows
        .into_values()
        .map(|mut r| {
            if let (Some(p), Some(m)) = (r.potential_values, r.measured_pairs) {
                r.element_count_ratio = count_ratio(p, m).ok().map(Fixed17);
            }
            r
        })
        .collect();
    Ok(Report {
        schema: OUTPUT_SCHEMA,
        kind: "report",
        rows,
    })
}

pub fn render_text(report: &Report) -> String {
    let header = [
        "model", "seed", "n", "delta", "chsh", "gwzz_lhs", "gwzz", "obstruction", "ratio",
    ];
    let f = |v: Option<Fixed17>| opt_num(v.map(|x| x.0));
    let v = |v: Option<Verdict>| v.map(verdict_str).unwrap_or("n/a").to_string();
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &report.rows {
        table.push(vec![
            r.model.clone(),
            r.seed.to_string(),
            r.n_trials.to_string(),
            f(r.delta),
            v(r.chsh_verdict),
            f(r.gwzz_lhs),
            v(r.gwzz_verdict),
            r.obstruction.clone().unwrap_or_else(|| "n/a".into()),
            f(r.element_count_ratio),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for row in table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
    }
    s
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = build_report(&a.inputs, a.k)?;
    match a.format {
        Format::Json => write_json(&report, a.out.as_deref(), out),
        Format::Text => {
            let text = render_text(&report);
            match &a.out {
                Some(p) => fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}
