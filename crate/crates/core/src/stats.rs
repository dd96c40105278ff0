//! Estimators and inequality evaluators over measured data.
//!
//! Everything is accumulated in integer counters keyed by setting pair; a
//! count becomes a rate exactly once, when a report is produced. The bound
//! |Δ| ≤ 2 is never asserted here for measured data: reports state a verdict
//! computed from the data.

use num_traits::Num;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CounterfactualRecord, Outcome, Term, TrialRecord};
use crate::json::{self, Fixed17};
use crate::scalar::{Exact, Real};
use crate::tables::all_quadruples;

/// Default number of standard errors a violation must clear.
pub const DEFAULT_K: f64 = 5.0;

/// Tolerance for floating-point evaluation of the potential-outcome bound.
pub const GPW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no trials recorded for pair {0}")]
    InsufficientData(Term),
    #[error("estimate for pair {got} supplied where {expected} was expected")]
    MismatchedPair { expected: Term, got: Term },
    #[error("probability for pair {0} outside [0, 1]")]
    ProbabilityOutOfRange(Term),
    #[error("counterfactual data contain records without potential values")]
    NotCounterfactuallyDefinite,
}

/// Per-pair integer accumulators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounters {
    pub n: [u64; 4],
    pub sum_xy: [i64; 4],
}

impl PairCounters {
    pub fn push(&mut self, term: Term, x: Outcome, y: Outcome) {
        let i = term.index();
        self.n[i] += 1;
        self.sum_xy[i] += (x * y).value() as i64;
    }

    pub fn merge(mut self, other: PairCounters) -> PairCounters {
        for i in 0..4 {
            self.n[i] += other.n[i];
            self.sum_xy[i] += other.sum_xy[i];
        }
        self
    }

    /// Parallel fold; the result does not depend on how work is split.
    pub fn from_records(records: &[TrialRecord]) -> PairCounters {
        records
            .par_iter()
            .fold(PairCounters::default, |mut c, r| {
                c.push(r.pair, r.x, r.y);
                c
            })
            .reduce(PairCounters::default, PairCounters::merge)
    }

    /// Number of trials for `term` with `x = y`.
    pub fn equal(&self, term: Term) -> u64 {
        let i = term.index();
        ((self.n[i] as i64 + self.sum_xy[i]) / 2) as u64
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn correlation<T: Real>(&self, term: Term) -> Result<CorrelationEstimate<T>, StatsError> {
        let i = term.index();
        let n = self.n[i];
        if n == 0 {
            return Err(StatsError::InsufficientData(term));
        }
        let sum_xy = self.sum_xy[i];
        let mean = T::ratio(sum_xy, n);
        let stderr = ((T::one() - mean * mean).max(T::zero()) / T::lit(n as f64)).sqrt();
        Ok(CorrelationEstimate {
            pair: term,
            n,
            sum_xy,
            mean,
            stderr,
        })
    }

    pub fn equality<T: Real>(&self, term: Term) -> Result<EqualityEstimate<T>, StatsError> {
        let n = self.n[term.index()];
        if n == 0 {
            return Err(StatsError::InsufficientData(term));
        }
        Ok(EqualityEstimate::from_counts(term, self.equal(term), n))
    }
}

/// Empirical ⟨x·y⟩ for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate<T: Real = f64> {
    pub pair: Term,
    pub n: u64,
    pub sum_xy: i64,
    #[serde(with = "json::real")]
    pub mean: T,
    /// `sqrt((1 − mean²)/n)`, plug-in variance, no continuity correction.
    #[serde(with = "json::real")]
    pub stderr: T,
}

impl<T: Real> CorrelationEstimate<T> {
    pub fn exact_mean(&self) -> Exact {
        Exact::new(self.sum_xy, self.n as i64)
    }
}

/// Empirical P{x = y} for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityEstimate<T: Real = f64> {
    pub pair: Term,
    pub n: u64,
    pub equal: u64,
    #[serde(with = "json::real")]
    pub p_hat: T,
    #[serde(with = "json::real")]
    pub stderr: T,
}

impl<T: Real> EqualityEstimate<T> {
    fn from_counts(pair: Term, equal: u64, n: u64) -> Self {
        let p_hat = T::ratio(equal as i64, n);
        let stderr = (p_hat * (T::one() - p_hat) / T::lit(n as f64)).sqrt();
        Self {
            pair,
            n,
            equal,
            p_hat,
            stderr,
        }
    }

    pub fn exact_p(&self) -> Exact {
        Exact::new(self.equal as i64, self.n as i64)
    }
}

pub fn estimate_correlation<T: Real>(
    records: &[TrialRecord],
    pair: Term,
) -> Result<CorrelationEstimate<T>, StatsError> {
    PairCounters::from_records(records).correlation(pair)
}

pub fn equality_probability<T: Real>(
    records: &[TrialRecord],
    pair: Term,
) -> Result<EqualityEstimate<T>, StatsError> {
    PairCounters::from_records(records).equality(pair)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshDelta<T: Real = f64> {
    #[serde(with = "json::real")]
    pub delta: T,
    #[serde(with = "json::real")]
    pub stderr: T,
}

/// `Δ = E_ac − E_ab − E_db − E_dc` with quadrature standard error.
pub fn chsh_delta<T: Real>(
    e_ac: &CorrelationEstimate<T>,
    e_ab: &CorrelationEstimate<T>,
    e_db: &CorrelationEstimate<T>,
    e_dc: &CorrelationEstimate<T>,
) -> Result<ChshDelta<T>, StatsError> {
    let es = [e_ac, e_ab, e_db, e_dc];
    for (e, expected) in es.iter().zip(Term::ALL) {
        if e.pair != expected {
            return Err(StatsError::MismatchedPair {
                expected,
                got: e.pair,
            });
        }
    }
    let delta = es
        .iter()
        .fold(T::zero(), |acc, e| acc + T::lit(e.pair.sign() as f64) * e.mean);
    let var = es.iter().fold(T::zero(), |acc, e| acc + e.stderr * e.stderr);
    Ok(ChshDelta {
        delta,
        stderr: var.sqrt(),
    })
}

/// `p_ac − p_ab − p_db − p_dc`; the potential-outcome bound is 0.
///
/// Generic over any ordered numeric type, so it evaluates exactly on
/// rationals as well as on floats.
pub fn gwzz_lhs<T: Num + PartialOrd + Copy>(p_ac: T, p_ab: T, p_db: T, p_dc: T) -> Result<T, StatsError> {
    for (p, term) in [p_ac, p_ab, p_db, p_dc].into_iter().zip(Term::ALL) {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(StatsError::ProbabilityOutOfRange(term));
        }
    }
    Ok(p_ac - p_ab - p_db - p_dc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inapplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermAvailability {
    pub pair: Term,
    pub available: bool,
}

/// Evaluated left-hand side of one inequality against its bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport<T: Real = f64> {
    pub name: String,
    #[serde(with = "json::opt_real")]
    pub lhs: Option<T>,
    #[serde(with = "json::real")]
    pub bound: T,
    #[serde(with = "json::opt_real")]
    pub stderr: Option<T>,
    pub verdict: Verdict,
    pub n_per_term: [u64; 4],
    pub terms: Vec<TermAvailability>,
}

impl<T: Real> InequalityReport<T> {
    fn from_counters(name: &str, bound: T, counters: &PairCounters, value: Option<(T, T)>, k: T) -> Self {
        let terms: Vec<_> = Term::ALL
            .iter()
            .map(|t| TermAvailability {
                pair: *t,
                available: counters.n[t.index()] > 0,
            })
            .collect();
        let verdict = match value {
            None => Verdict::Inapplicable,
            Some((lhs, se)) if lhs - bound > k * se => Verdict::Violated,
            Some(_) => Verdict::Satisfied,
        };
        Self {
            name: name.to_string(),
            lhs: value.map(|v| v.0),
            bound,
            stderr: value.map(|v| v.1),
            verdict,
            n_per_term: counters.n,
            terms,
        }
    }

    pub fn unavailable_terms(&self) -> usize {
        self.terms.iter().filter(|t| !t.available).count()
    }
}

fn all_correlations<T: Real>(c: &PairCounters) -> Option<[CorrelationEstimate<T>; 4]> {
    let [ac, ab, db, dc] = Term::ALL.map(|t| c.correlation::<T>(t).ok());
    Some([ac?, ab?, db?, dc?])
}

fn all_equalities<T: Real>(c: &PairCounters) -> Option<[EqualityEstimate<T>; 4]> {
    let [ac, ab, db, dc] = Term::ALL.map(|t| c.equality::<T>(t).ok());
    Some([ac?, ab?, db?, dc?])
}

/// `|Δ| ≤ 2` evaluated on measured data.
pub fn chsh_report<T: Real>(counters: &PairCounters, k: T) -> InequalityReport<T> {
    let value = all_correlations::<T>(counters).map(|[ac, ab, db, dc]| {
        let d = chsh_delta(&ac, &ab, &db, &dc).expect("estimates in canonical order");
        (d.delta.abs(), d.stderr)
    });
    InequalityReport::from_counters("chsh", T::lit(2.0), counters, value, k)
}

/// `P{X=Y|ac} − P{X=Y|ab} − P{X=Y|db} − P{X=Y|dc} ≤ 0` on measured data.
pub fn gwzz_report<T: Real>(counters: &PairCounters, k: T) -> InequalityReport<T> {
    let value = all_equalities::<T>(counters).map(|[ac, ab, db, dc]| {
        let lhs = gwzz_lhs(ac.p_hat, ab.p_hat, db.p_hat, dc.p_hat).expect("rates lie in [0, 1]");
        let var = [ac, ab, db, dc]
            .iter()
            .fold(T::zero(), |acc, e| acc + e.stderr * e.stderr);
        (lhs, var.sqrt())
    });
    InequalityReport::from_counters("gwzz", T::zero(), counters, value, k)
}

/// One tick window of a windowed analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WindowReport<T: Real = f64> {
    pub index: u64,
    pub first_tick: u64,
    pub last_tick: u64,
    pub report: InequalityReport<T>,
}

/// Evaluate the equality-probability inequality separately in consecutive
/// windows of `window_size` ticks. A window that lacks any of the four pairs
/// is `Inapplicable`; with one trial per tick and `window_size = 1` that is
/// every window.
pub fn windowed_gwzz<T: Real>(records: &[TrialRecord], window_size: u64, k: T) -> Vec<WindowReport<T>> {
    assert!(window_size >= 1, "window size must be at least 1");
    let mut windows: Vec<(u64, PairCounters)> = Vec::new();
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.tick, r.trial));
    for r in sorted {
        let w = r.tick.0 / window_size;
        match windows.last_mut() {
            Some((idx, c)) if *idx == w => c.push(r.pair, r.x, r.y),
            _ => {
                let mut c = PairCounters::default();
                c.push(r.pair, r.x, r.y);
                windows.push((w, c));
            }
        }
    }
    windows
        .into_par_iter()
        .map(|(index, c)| WindowReport {
            index,
            first_tick: index * window_size,
            last_tick: index * window_size + (window_size - 1),
            report: gwzz_report(&c, k),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window_size: u64,
    pub windows: u64,
    pub inapplicable: u64,
    pub satisfied: u64,
    pub violated: u64,
}

impl WindowSummary {
    pub fn from_reports<T: Real>(window_size: u64, reports: &[WindowReport<T>]) -> Self {
        let mut s = WindowSummary {
            window_size,
            ..Default::default()
        };
        for w in reports {
            s.windows += 1;
            match w.report.verdict {
                Verdict::Inapplicable => s.inapplicable += 1,
                Verdict::Satisfied => s.satisfied += 1,
                Verdict::Violated => s.violated += 1,
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermStatus {
    /// The pair actually measured; the value is `1{x = y}`.
    Observable(u8),
    Unobservable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorEntry {
    pub trial: u64,
    pub terms: [TermStatus; 4],
}

impl IndicatorEntry {
    pub fn observable_count(&self) -> usize {
        self.terms
            .iter()
            .filter(|t| matches!(t, TermStatus::Observable(_)))
            .count()
    }
}

/// Per-trial indicator bookkeeping: exactly one of the four terms is
/// observable in each trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorLedger {
    pub entries: Vec<IndicatorEntry>,
    pub per_pair: [u64; 4],
}

impl IndicatorLedger {
    /// Observed terms over available term slots (four per trial).
    pub fn coverage(&self) -> Option<Exact> {
        let trials = self.entries.len() as i64;
        let observed: i64 = self.entries.iter().map(|e| e.observable_count() as i64).sum();
        (trials > 0).then(|| Exact::new(observed, 4 * trials))
    }

    pub fn summary(&self) -> IndicatorSummary {
        let observed = self.entries.iter().map(|e| e.observable_count() as u64).sum();
        IndicatorSummary {
            trials: self.entries.len() as u64,
            per_pair: self.per_pair,
            observed_terms: observed,
            term_slots: 4 * self.entries.len() as u64,
            coverage: self
                .coverage()
                .map(|c| Fixed17(*c.numer() as f64 / *c.denom() as f64)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub trials: u64,
    pub per_pair: [u64; 4],
    pub observed_terms: u64,
    pub term_slots: u64,
    pub coverage: Option<Fixed17>,
}

pub fn indicator_accounting(records: &[TrialRecord]) -> IndicatorLedger {
    let entries: Vec<IndicatorEntry> = records
        .par_iter()
        .map(|r| {
            let mut terms = [TermStatus::Unobservable; 4];
            terms[r.pair.index()] = TermStatus::Observable((r.x == r.y) as u8);
            IndicatorEntry {
                trial: r.trial,
                terms,
            }
        })
        .collect();
    let mut per_pair = [0u64; 4];
    for r in records {
        per_pair[r.pair.index()] += 1;
    }
    IndicatorLedger { entries, per_pair }
}

/// `1{ξ=η} − 1{ξ=ζ} − 1{κ=ζ} − 1{κ=η}` for one deterministic assignment.
pub fn indicator_combination(q: [Outcome; 4]) -> i32 {
    let [xi, eta, zeta, kappa] = q;
    let ind = |a: Outcome, b: Outcome| (a == b) as i32;
    ind(xi, eta) - ind(xi, zeta) - ind(kappa, zeta) - ind(kappa, eta)
}

/// Equality probabilities of a mixture over the 16 deterministic atoms (in
/// [`all_quadruples`] order), evaluated through [`gwzz_lhs`].
pub fn gpw_mixture_lhs<T: Num + PartialOrd + Copy>(weights: &[T; 16]) -> Result<T, StatsError> {
    let atoms = all_quadruples();
    let mut total = T::zero();
    let mut mass = [T::zero(); 4];
    for (w, [xi, eta, zeta, kappa]) in weights.iter().zip(atoms) {
        total = total + *w;
        let hits = [xi == eta, xi == zeta, kappa == zeta, kappa == eta];
        for (m, hit) in mass.iter_mut().zip(hits) {
            // Adding zero keeps every partial sum on the same rounding path
            // as `total`, so no ratio can exceed one.
            *m = *m + if hit { *w } else { T::zero() };
        }
    }
    let [ac, ab, db, dc] = mass.map(|m| m / total);
    gwzz_lhs(ac, ab, db, dc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpwVerification {
    pub atoms: usize,
    pub atom_max: i32,
    pub atom_min: i32,
    pub atom_failures: Vec<[Outcome; 4]>,
    pub mixtures: u64,
    pub mixtures_ok: u64,
    pub worst_mixture_lhs: Option<Fixed17>,
}

impl GpwVerification {
    pub fn ok(&self) -> bool {
        self.atom_failures.is_empty() && self.mixtures_ok == self.mixtures
    }
}

/// Check the potential-outcome inequality on every deterministic atom, then
/// on `trials` random mixtures of them.
pub fn verify_gpw_inequality(trials: u64, seed: u64) -> GpwVerification {
    verify_gpw_inequality_with(trials, seed, indicator_combination)
}

pub fn verify_gpw_inequality_with<F>(trials: u64, seed: u64, indicator: F) -> GpwVerification
where
    F: Fn([Outcome; 4]) -> i32,
{
    let values: Vec<(i32, [Outcome; 4])> = all_quadruples().iter().map(|q| (indicator(*q), *q)).collect();
    let atom_failures = values.iter().filter(|(v, _)| *v > 0).map(|(_, q)| *q).collect();
    let atom_max = values.iter().map(|(v, _)| *v).max().unwrap_or(0);
    let atom_min = values.iter().map(|(v, _)| *v).min().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixtures_ok = 0;
    let mut worst: Option<f64> = None;
    for _ in 0..trials {
        // Exponential weights: a uniform point on the simplex.
        let weights: [f64; 16] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
        let lhs = gpw_mixture_lhs(&weights).unwrap_or(f64::INFINITY);
        if lhs <= GPW_TOLERANCE {
            mixtures_ok += 1;
        }
        worst = Some(worst.map_or(lhs, |w| w.max(lhs)));
    }
    GpwVerification {
        atoms: values.len(),
        atom_max,
        atom_min,
        atom_failures,
        mixtures: trials,
        mixtures_ok,
        worst_mixture_lhs: worst.map(Fixed17),
    }
}

/// Equality probabilities between potential values of one counterfactual
/// dataset: P{A_a = B_c}, P{A_a = B_b}, P{A_d = B_b}, P{A_d = B_c}.
pub fn potential_equality<T: Real>(
    records: &[CounterfactualRecord],
) -> Result<[EqualityEstimate<T>; 4], StatsError> {
    let mut counters = PairCounters::default();
    for r in records {
        match r {
            CounterfactualRecord::Definite { profile, .. } => {
                for term in Term::ALL {
                    let (x, y) = profile.outcomes(term);
                    counters.push(term, x, y);
                }
            }
            CounterfactualRecord::Unsupported { .. } => {
                return Err(StatsError::NotCounterfactuallyDefinite)
            }
        }
    }
    let [ac, ab, db, dc] = Term::ALL.map(|t| counters.equality::<T>(t));
    Ok([ac?, ab?, db?, dc?])
}

/// Everything the analysis of one measured run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunAnalysis<T: Real = f64> {
    pub n_trials: u64,
    pub correlations: Vec<CorrelationEstimate<T>>,
    pub delta: Option<ChshDelta<T>>,
    pub chsh: InequalityReport<T>,
    pub equality: Vec<EqualityEstimate<T>>,
    pub gwzz: InequalityReport<T>,
    pub windows: WindowSummary,
    pub indicator: IndicatorSummary,
}

/// Full analysis of a measured run. Returns the per-window reports alongside
/// the summary, since they can be numerous.
pub fn analyze_run<T: Real>(
    records: &[TrialRecord],
    window_size: u64,
    k: T,
) -> (RunAnalysis<T>, Vec<WindowReport<T>>) {
    let counters = PairCounters::from_records(records);
    let correlations: Vec<_> = Term::ALL
        .iter()
        .filter_map(|t| counters.correlation::<T>(*t).ok())
        .collect();
    let delta = all_correlations::<T>(&counters)
        .map(|[ac, ab, db, dc]| chsh_delta(&ac, &ab, &db, &dc).expect("canonical order"));
    let equality = Term::ALL
        .iter()
        .filter_map(|t| counters.equality::<T>(*t).ok())
        .collect();
    let windows = windowed_gwzz(records, window_size, k);
    let analysis = RunAnalysis {
        n_trials: records.len() as u64,
        correlations,
        delta,
        chsh: chsh_report(&counters, k),
        equality,
        gwzz: gwzz_report(&counters, k),
        windows: WindowSummary::from_reports(window_size, &windows),
        indicator: indicator_accounting(records).summary(),
    };
    (analysis, windows)
}
