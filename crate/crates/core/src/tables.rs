//! Counterfactual outcome tables.
//!
//! A [`PotentialTable`] holds one row of four signed products per trial, in
//! tick order. [`reorder_by_lambda`] regroups rows by exact source-token
//! equality; in time-sensitive mode it refuses to do so when the same token
//! carries different potential values at different ticks and returns a
//! [`ProofObstruction`] listing the conflicting entries instead.
//!
//! All accounting is integer-exact.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CounterfactualRecord, Label, Outcome, Profile, SourceToken, TimeIndex, TrialRecord};
use crate::scalar::Exact;

pub const DEFAULT_WITNESS_CAP: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error(
        "model inconsistency: token {token} at tick {tick} gave different values in trials {first_trial} and {second_trial}"
    )]
    ModelInconsistency {
        token: u32,
        tick: u64,
        first_trial: u64,
        second_trial: u64,
    },
    #[error("element count audit needs at least one measured trial")]
    EmptyRun,
}

/// `ξη − ξζ − κζ − κη`; equals +2 or −2 for any four ±1 values.
pub fn row_delta(xi: Outcome, eta: Outcome, zeta: Outcome, kappa: Outcome) -> i32 {
    let (xi, eta, zeta, kappa) = (
        xi.value() as i32,
        eta.value() as i32,
        zeta.value() as i32,
        kappa.value() as i32,
    );
    xi * eta - xi * zeta - kappa * zeta - kappa * eta
}

/// `+A_a B_c, −A_a B_b, −A_d B_b, −A_d B_c`.
pub fn signed_products(p: &Profile) -> [i8; 4] {
    [
        (p.a * p.c).value(),
        -(p.a * p.b).value(),
        -(p.d * p.b).value(),
        -(p.d * p.c).value(),
    ]
}

/// Every assignment of four ±1 values, in binary order.
pub fn all_quadruples() -> [[Outcome; 4]; 16] {
    std::array::from_fn(|i| {
        std::array::from_fn(|bit| Outcome::from_sign(i & (1 << (3 - bit)) == 0))
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIdentityReport {
    pub checked: usize,
    pub passed: usize,
    pub failures: Vec<[Outcome; 4]>,
}

impl RowIdentityReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.passed == self.checked
    }
}

/// Check that `delta` maps every quadruple to ±2.
pub fn verify_row_identity_with<F>(delta: F) -> RowIdentityReport
where
    F: Fn(Outcome, Outcome, Outcome, Outcome) -> i32,
{
    let mut failures = Vec::new();
    for q in all_quadruples() {
        let v = delta(q[0], q[1], q[2], q[3]);
        if v != 2 && v != -2 {
            failures.push(q);
        }
    }
    RowIdentityReport {
        checked: 16,
        passed: 16 - failures.len(),
        failures,
    }
}

pub fn verify_row_identity() -> RowIdentityReport {
    verify_row_identity_with(row_delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub trial: u64,
    pub tick: TimeIndex,
    pub token: SourceToken,
    pub profile: Profile,
}

impl TableRow {
    pub fn products(&self) -> [i8; 4] {
        signed_products(&self.profile)
    }

    pub fn sum(&self) -> i32 {
        let p = &self.profile;
        row_delta(p.a, p.c, p.b, p.d)
    }
}

#[derive(Serialize)]
struct RowView {
    trial: u64,
    tick: TimeIndex,
    lambda: SourceToken,
    products: [i8; 4],
    sum: i32,
}

impl Serialize for TableRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RowView {
            trial: self.trial,
            tick: self.tick,
            lambda: self.token,
            products: self.products(),
            sum: self.sum(),
        }
        .serialize(s)
    }
}

/// Count of rows summing to +2 and to −2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSumHistogram {
    #[serde(rename = "+2")]
    pub plus2: u64,
    #[serde(rename = "-2")]
    pub minus2: u64,
    /// Always zero for well-formed rows.
    pub other: u64,
}

/// Integer totals shared by all table shapes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableTotals {
    pub rows: u64,
    pub row_sum_total: i64,
    pub column_totals: [i64; 4],
    pub row_sum_histogram: RowSumHistogram,
}

impl TableTotals {
    fn from_rows<'a>(rows: impl IntoIterator<Item = &'a TableRow>) -> Self {
        let mut t = TableTotals::default();
        for row in rows {
            t.rows += 1;
            let sum = row.sum();
            t.row_sum_total += sum as i64;
            for (c, p) in t.column_totals.iter_mut().zip(row.products()) {
                *c += p as i64;
            }
            match sum {
                2 => t.row_sum_histogram.plus2 += 1,
                -2 => t.row_sum_histogram.minus2 += 1,
                _ => t.row_sum_histogram.other += 1,
            }
        }
        t
    }

    /// Mean of the row sums, exactly.
    pub fn mean_row_sum(&self) -> Option<Exact> {
        (self.rows > 0).then(|| Exact::new(self.row_sum_total, self.rows as i64))
    }

    /// Sum of the four (already signed) column means, exactly.
    pub fn column_mean_combination(&self) -> Option<Exact> {
        (self.rows > 0).then(|| {
            self.column_totals
                .iter()
                .map(|c| Exact::new(*c, self.rows as i64))
                .sum()
        })
    }
}

/// Anything that holds potential single-station values.
pub trait PotentialValueCount {
    fn potential_values(&self) -> u64;
}

/// Rows of signed products, one per counterfactual record, in tick order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PotentialTable {
    pub rows: Vec<TableRow>,
}

impl PotentialTable {
    pub fn totals(&self) -> TableTotals {
        TableTotals::from_rows(&self.rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl PotentialValueCount for PotentialTable {
    fn potential_values(&self) -> u64 {
        4 * self.rows.len() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstructionKind {
    TimeConflict,
    NotCounterfactuallyDefinite,
}

/// A cited potential value: which record, at which tick, and what it was.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueRef {
    pub trial: u64,
    pub tick: TimeIndex,
    pub value: Outcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// The same token gives `label` different values at two ticks.
    TimeConflict {
        lambda: SourceToken,
        label: Label,
        first: ValueRef,
        second: ValueRef,
    },
    /// The model furnished no potential values for this trial.
    Unsupported { trial: u64 },
}

/// Why a table cannot be reordered into rows that each sum to ±2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofObstruction {
    pub kind: ObstructionKind,
    /// Exact number of conflicts; `witnesses` may be capped.
    pub total_conflicts: u64,
    pub witnesses: Vec<Witness>,
}

impl ProofObstruction {
    /// Re-derive every witness from the source records.
    pub fn replay(&self, records: &[CounterfactualRecord]) -> bool {
        let by_trial: HashMap<u64, &CounterfactualRecord> =
            records.iter().map(|r| (r.trial(), r)).collect();
        let value_at = |r: &ValueRef, lambda: SourceToken, label: Label| match by_trial.get(&r.trial) {
            Some(CounterfactualRecord::Definite {
                tick,
                source,
                profile,
                ..
            }) => *tick == r.tick && *source == lambda && profile.value(label) == r.value,
            _ => false,
        };
        !self.witnesses.is_empty()
            && self.witnesses.iter().all(|w| match w {
                Witness::TimeConflict {
                    lambda,
                    label,
                    first,
                    second,
                } => {
                    first.tick != second.tick
                        && first.value != second.value
                        && value_at(first, *lambda, *label)
                        && value_at(second, *lambda, *label)
                }
                Witness::Unsupported { trial } => matches!(
                    by_trial.get(trial),
                    Some(CounterfactualRecord::Unsupported { .. })
                ),
            })
    }
}

/// Build the potential-outcome table. Any record without potential values
/// makes the table impossible and is reported as an obstruction.
pub fn build_potential_table(
    records: &[CounterfactualRecord],
) -> Result<PotentialTable, ProofObstruction> {
    build_potential_table_capped(records, DEFAULT_WITNESS_CAP)
}

pub fn build_potential_table_capped(
    records: &[CounterfactualRecord],
    witness_cap: usize,
) -> Result<PotentialTable, ProofObstruction> {
    let unsupported: Vec<u64> = records
        .iter()
        .filter(|r| !r.is_supported())
        .map(|r| r.trial())
        .collect();
    if !unsupported.is_empty() {
        return Err(ProofObstruction {
            kind: ObstructionKind::NotCounterfactuallyDefinite,
            total_conflicts: unsupported.len() as u64,
            witnesses: unsupported
                .iter()
                .take(witness_cap)
                .map(|&trial| Witness::Unsupported { trial })
                .collect(),
        });
    }
    let mut rows: Vec<TableRow> = records
        .par_iter()
        .filter_map(|r| match *r {
            CounterfactualRecord::Definite {
                trial,
                tick,
                source,
                profile,
            } => Some(TableRow {
                trial,
                tick,
                token: source,
                profile,
            }),
            CounterfactualRecord::Unsupported { .. } => None,
        })
        .collect();
    rows.sort_by_key(|r| (r.tick, r.trial));
    Ok(PotentialTable { rows })
}

/// Rows grouped by exact source-token value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupedTable {
    pub time_sensitive: bool,
    pub groups: BTreeMap<SourceToken, Vec<TableRow>>,
    /// Potential values that differ from the first row of their group.
    pub conflicts: u64,
}

impl GroupedTable {
    pub fn totals(&self) -> TableTotals {
        TableTotals::from_rows(self.groups.values().flatten())
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn summary(&self) -> GroupedSummary {
        GroupedSummary {
            time_sensitive: self.time_sensitive,
            group_count: self.group_count() as u64,
            conflicts: self.conflicts,
            totals: self.totals(),
        }
    }
}

impl PotentialValueCount for GroupedTable {
    fn potential_values(&self) -> u64 {
        4 * self.groups.values().map(|g| g.len() as u64).sum::<u64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedSummary {
    pub time_sensitive: bool,
    pub group_count: u64,
    pub conflicts: u64,
    #[serde(flatten)]
    pub totals: TableTotals,
}

#[derive(Serialize)]
struct GroupView<'a> {
    lambda: SourceToken,
    rows: &'a [TableRow],
}

#[derive(Serialize)]
struct GroupedView<'a> {
    #[serde(flatten)]
    summary: GroupedSummary,
    groups: Vec<GroupView<'a>>,
}

impl Serialize for GroupedTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GroupedView {
            summary: self.summary(),
            groups: self
                .groups
                .iter()
                .map(|(k, rows)| GroupView { lambda: *k, rows })
                .collect(),
        }
        .serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reordering {
    Grouped(GroupedTable),
    Obstructed(ProofObstruction),
}

/// Regroup rows by token.
///
/// Without time sensitivity, ticks are ignored: grouping always proceeds and
/// `conflicts` counts potential values that disagree with their group's first
/// row. With time sensitivity, any such disagreement between different ticks
/// is a [`Witness::TimeConflict`] and the result is an obstruction.
/// Disagreement at equal `(token, tick)` is a model bug in either mode.
pub fn reorder_by_lambda(
    table: &PotentialTable,
    time_sensitive: bool,
    witness_cap: usize,
) -> Result<Reordering, TableError> {
    let mut groups: BTreeMap<SourceToken, Vec<TableRow>> = BTreeMap::new();
    for row in &table.rows {
        groups.entry(row.token).or_default().push(*row);
    }
    let mut conflicts = 0u64;
    let mut witnesses = Vec::new();
    for (token, rows) in groups.iter_mut() {
        rows.sort_by_key(|r| (r.tick, r.trial));
        for pair in rows.windows(2) {
            if pair[0].tick == pair[1].tick && pair[0].profile != pair[1].profile {
                return Err(TableError::ModelInconsistency {
                    token: token.0,
                    tick: pair[0].tick.0,
                    first_trial: pair[0].trial,
                    second_trial: pair[1].trial,
                });
            }
        }
        let reference = rows[0];
        for row in &rows[1..] {
            for label in Label::ALL {
                let (v0, v1) = (reference.profile.value(label), row.profile.value(label));
                if v0 == v1 {
                    continue;
                }
                conflicts += 1;
                if time_sensitive && witnesses.len() < witness_cap {
                    witnesses.push(Witness::TimeConflict {
                        lambda: *token,
                        label,
                        first: ValueRef {
                            trial: reference.trial,
                            tick: reference.tick,
                            value: v0,
                        },
                        second: ValueRef {
                            trial: row.trial,
                            tick: row.tick,
                            value: v1,
                        },
                    });
                }
            }
        }
    }
    if time_sensitive && conflicts > 0 {
        return Ok(Reordering::Obstructed(ProofObstruction {
            kind: ObstructionKind::TimeConflict,
            total_conflicts: conflicts,
            witnesses,
        }));
    }
    Ok(Reordering::Grouped(GroupedTable {
        time_sensitive,
        groups,
        conflicts,
    }))
}

/// All rows for one fixed token, keyed by tick.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimeIndexedTable {
    pub lambda: SourceToken,
    pub rows: Vec<TableRow>,
}

impl TimeIndexedTable {
    pub fn totals(&self) -> TableTotals {
        TableTotals::from_rows(&self.rows)
    }
}

impl PotentialValueCount for TimeIndexedTable {
    fn potential_values(&self) -> u64 {
        4 * self.rows.len() as u64
    }
}

/// Select the rows carrying `token`, ordered by tick.
pub fn build_time_indexed_table(
    records: &[CounterfactualRecord],
    token: SourceToken,
) -> Result<TimeIndexedTable, ProofObstruction> {
    let table = build_potential_table(records)?;
    Ok(TimeIndexedTable {
        lambda: token,
        rows: table.rows.into_iter().filter(|r| r.token == token).collect(),
    })
}

/// Potential values per measured outcome pair.
pub fn count_ratio(potential_values: u64, measured_pairs: u64) -> Result<f64, TableError> {
    if measured_pairs == 0 {
        return Err(TableError::EmptyRun);
    }
    Ok(potential_values as f64 / measured_pairs as f64)
}

/// Ratio of the potential values a table adds up to the outcome pairs an
/// actual run of the same configuration measured.
pub fn element_count_audit<C: PotentialValueCount + ?Sized>(
    table: &C,
    run: &[TrialRecord],
) -> Result<f64, TableError> {
    count_ratio(table.potential_values(), run.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Term;
    use proptest::prelude::*;
    use Outcome::{Minus as M, Plus as P};

    fn profile(a: Outcome, d: Outcome, b: Outcome, c: Outcome) -> Profile {
        Profile { a, d, b, c }
    }

    fn definite(trial: u64, token: u32, p: Profile) -> CounterfactualRecord {
        CounterfactualRecord::Definite {
            trial,
            tick: TimeIndex(trial),
            source: SourceToken(token),
            profile: p,
        }
    }

    #[test]
    fn row_delta_examples() {
        assert_eq!(row_delta(P, P, P, P), -2);
        assert_eq!(row_delta(P, P, M, M), 2);
    }

    #[test]
    fn row_identity_exhaustive() {
        // Oracle: enumerate all 16 assignments directly as integers.
        let mut seen = 0;
        for bits in 0..16u8 {
            let v = |i: u8| if bits & (1 << i) == 0 { 1i32 } else { -1 };
            let (xi, eta, zeta, kappa) = (v(3), v(2), v(1), v(0));
            let expected = xi * eta - xi * zeta - kappa * zeta - kappa * eta;
            assert!(expected == 2 || expected == -2);
            let o = |x: i32| Outcome::try_from_int(x as i64).unwrap();
            assert_eq!(row_delta(o(xi), o(eta), o(zeta), o(kappa)), expected);
            seen += 1;
        }
        assert_eq!(seen, 16);
        let report = verify_row_identity();
        assert!(report.ok());
        assert_eq!(report.checked, 16);
    }

    #[test]
    fn injected_fault_is_caught() {
        let report = verify_row_identity_with(|x, e, z, k| -row_delta(x, e, z, k) + 1);
        assert!(!report.ok());
        assert_eq!(report.failures.len(), 16);
    }

    #[test]
    fn quadruples_are_distinct() {
        let qs = all_quadruples();
        for i in 0..16 {
            for j in 0..i {
                assert_ne!(qs[i], qs[j]);
            }
        }
    }

    #[test]
    fn empty_and_single_tables() {
        let empty = build_potential_table(&[]).unwrap();
        assert!(empty.is_empty());
        let t = build_potential_table(&[definite(0, 1, profile(P, P, P, P))]).unwrap();
        assert_eq!(t.rows[0].products(), [1, -1, -1, -1]);
        assert_eq!(t.rows[0].sum(), -2);
    }

    #[test]
    fn unsupported_records_block_the_table() {
        let recs = [
            definite(0, 1, profile(P, P, P, P)),
            CounterfactualRecord::Unsupported { trial: 1 },
        ];
        let obs = build_potential_table(&recs).unwrap_err();
        assert_eq!(obs.kind, ObstructionKind::NotCounterfactuallyDefinite);
        assert_eq!(obs.witnesses, vec![Witness::Unsupported { trial: 1 }]);
        assert!(obs.replay(&recs));
    }

    #[test]
    fn consistent_table_groups_without_conflicts() {
        let p1 = profile(P, M, P, P);
        let p2 = profile(M, M, P, M);
        let recs = [definite(0, 3, p1), definite(1, 5, p2), definite(2, 3, p1)];
        let table = build_potential_table(&recs).unwrap();
        for sensitive in [false, true] {
            let Reordering::Grouped(g) = reorder_by_lambda(&table, sensitive, 100).unwrap() else {
                panic!("expected grouping");
            };
            assert_eq!(g.group_count(), 2);
            assert_eq!(g.conflicts, 0);
            assert_eq!(g.groups[&SourceToken(3)].len(), 2);
            let totals = g.totals();
            assert_eq!(totals.mean_row_sum(), totals.column_mean_combination());
        }
    }

    #[test]
    fn time_conflicts_produce_sound_witnesses() {
        let recs = [
            definite(0, 3, profile(P, P, P, P)),
            definite(1, 3, profile(M, P, P, P)),
            definite(2, 3, profile(M, M, P, P)),
        ];
        let table = build_potential_table(&recs).unwrap();
        let Reordering::Obstructed(obs) = reorder_by_lambda(&table, true, 100).unwrap() else {
            panic!("expected obstruction");
        };
        assert_eq!(obs.kind, ObstructionKind::TimeConflict);
        assert_eq!(obs.total_conflicts, 3);
        assert_eq!(obs.witnesses.len(), 3);
        assert!(obs.replay(&recs));

        let capped = match reorder_by_lambda(&table, true, 1).unwrap() {
            Reordering::Obstructed(o) => o,
            _ => unreachable!(),
        };
        assert_eq!(capped.total_conflicts, 3);
        assert_eq!(capped.witnesses.len(), 1);

        let Reordering::Grouped(g) = reorder_by_lambda(&table, false, 100).unwrap() else {
            panic!("time-free mode groups regardless");
        };
        assert_eq!(g.conflicts, 3);
    }

    #[test]
    fn tampered_witness_fails_replay() {
        let recs = [
            definite(0, 3, profile(P, P, P, P)),
            definite(1, 3, profile(M, P, P, P)),
        ];
        let table = build_potential_table(&recs).unwrap();
        let Reordering::Obstructed(mut obs) = reorder_by_lambda(&table, true, 100).unwrap() else {
            panic!()
        };
        assert!(obs.replay(&recs));
        if let Witness::TimeConflict { second, .. } = &mut obs.witnesses[0] {
            second.value = P;
        }
        assert!(!obs.replay(&recs));
    }

    #[test]
    fn equal_tick_disagreement_is_a_model_bug() {
        let recs = [
            CounterfactualRecord::Definite {
                trial: 0,
                tick: TimeIndex(4),
                source: SourceToken(1),
                profile: profile(P, P, P, P),
            },
            CounterfactualRecord::Definite {
                trial: 1,
                tick: TimeIndex(4),
                source: SourceToken(1),
                profile: profile(M, P, P, P),
            },
        ];
        let table = build_potential_table(&recs).unwrap();
        assert!(matches!(
            reorder_by_lambda(&table, true, 10),
            Err(TableError::ModelInconsistency { .. })
        ));
    }

    #[test]
    fn time_indexed_table_filters_by_token() {
        let recs = [
            definite(0, 7, profile(P, P, P, P)),
            definite(1, 2, profile(M, P, P, P)),
            definite(2, 7, profile(M, M, P, P)),
        ];
        let t = build_time_indexed_table(&recs, SourceToken(7)).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.sum().abs() == 2));
        assert!(build_time_indexed_table(&recs, SourceToken(9)).unwrap().rows.is_empty());
    }

    #[test]
    fn element_count_ratios() {
        let recs: Vec<_> = (0..10).map(|i| definite(i, 1, profile(P, P, M, P))).collect();
        let run: Vec<_> = (0..10)
            .map(|i| TrialRecord {
                trial: i,
                tick: TimeIndex(i),
                pair: Term::AC,
                x: P,
                y: M,
                source: None,
            })
            .collect();
        let table = build_potential_table(&recs).unwrap();
        assert_eq!(element_count_audit(&table, &run).unwrap(), 4.0);
        assert_eq!(element_count_audit(&PotentialTable::default(), &run).unwrap(), 0.0);
        assert_eq!(element_count_audit(&table, &[]), Err(TableError::EmptyRun));
    }

    fn outcome() -> impl Strategy<Value = Outcome> {
        prop_oneof![Just(P), Just(M)]
    }

    fn prof() -> impl Strategy<Value = Profile> {
        (outcome(), outcome(), outcome(), outcome()).prop_map(|(a, d, b, c)| profile(a, d, b, c))
    }

    proptest! {
        #[test]
        fn row_delta_invariant_under_global_flip(x in outcome(), e in outcome(), z in outcome(), k in outcome()) {
            prop_assert_eq!(row_delta(-x, -e, -z, -k), row_delta(x, e, z, k));
            prop_assert_eq!(row_delta(x, e, z, k).abs(), 2);
        }

        #[test]
        fn time_free_grouping_keeps_exact_accounting(
            per_token in proptest::collection::vec(prof(), 1..8),
            tokens in proptest::collection::vec(0usize..8, 1..200),
        ) {
            let recs: Vec<_> = tokens
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let t = t % per_token.len();
                    definite(i as u64, t as u32, per_token[t])
                })
                .collect();
            let table = build_potential_table(&recs).unwrap();
            let Reordering::Grouped(g) = reorder_by_lambda(&table, true, 100).unwrap() else {
                panic!("consistent model must group");
            };
            let totals = g.totals();
            prop_assert_eq!(totals.rows, recs.len() as u64);
            prop_assert_eq!(totals.row_sum_histogram.other, 0);
            prop_assert_eq!(totals.mean_row_sum(), totals.column_mean_combination());
            let mean = totals.mean_row_sum().unwrap();
            prop_assert!(mean <= Exact::from_integer(2) && mean >= Exact::from_integer(-2));
        }
    }
}
