use std::time::{Duration, Instant};

use bellcheck::domain::{AngleSet, CounterfactualRecord, Term};
use bellcheck::harness::{self, read_artifact, write_artifact, Mode, RunConfig, Schedule};
use bellcheck::models::{ModelKind, ModelSpec};
use bellcheck::stats;
use proptest::prelude::*;

fn config(model: ModelKind, n: u64, mode: Mode, seed: u64) -> RunConfig<f64> {
    RunConfig::new(ModelSpec::new(model), n, mode, seed)
}

#[test]
fn same_config_same_bytes() {
    for mode in [Mode::Actual, Mode::Counterfactual] {
        let cfg = config(ModelKind::TimeDependentLocal, 5_000, mode, 21);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_artifact(&harness::run(&cfg).unwrap(), &mut a).unwrap();
        write_artifact(&harness::run(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn million_record_round_trip() {
    let cfg = config(ModelKind::QuantumSinglet, 1_000_000, Mode::Actual, 5);
    let art = harness::run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let t = Instant::now();
    harness::persist(&art, &path).unwrap();
    let back = harness::load::<f64>(&path).unwrap();
    let elapsed = t.elapsed();
    assert_eq!(back, art);
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
}

#[test]
fn sources_do_not_depend_on_schedule() {
    let mut uniform = config(ModelKind::BellLocal, 2_000, Mode::Actual, 9);
    let mut fixed = uniform.clone();
    fixed.schedule = Schedule::FixedSequence(vec![Term::DC, Term::AC]);
    let a = harness::run(&uniform).unwrap();
    let b = harness::run(&fixed).unwrap();
    let sa: Vec<_> = a.actual().unwrap().iter().map(|r| r.source).collect();
    let sb: Vec<_> = b.actual().unwrap().iter().map(|r| r.source).collect();
    assert_eq!(sa, sb);
    // Counterfactual runs emit the same tokens.
    uniform.mode = Mode::Counterfactual;
    let c = harness::run(&uniform).unwrap();
    let sc: Vec<_> = c
        .counterfactual()
        .unwrap()
        .iter()
        .map(|r| match r {
            CounterfactualRecord::Definite { source, .. } => Some(*source),
            CounterfactualRecord::Unsupported { .. } => None,
        })
        .collect();
    assert_eq!(sa, sc);
}

#[test]
fn actual_outcomes_match_potential_values() {
    for model in [
        ModelKind::BellLocal,
        ModelKind::TimeDependentLocal,
        ModelKind::NonlocalAllSettings,
    ] {
        let actual = harness::run(&config(model, 5_000, Mode::Actual, 33)).unwrap();
        let cf = harness::run(&config(model, 5_000, Mode::Counterfactual, 33)).unwrap();
        for (r, c) in actual.actual().unwrap().iter().zip(cf.counterfactual().unwrap()) {
            let CounterfactualRecord::Definite { profile, tick, .. } = c else {
                panic!("{} has unsupported records", model.name());
            };
            assert_eq!(r.tick, *tick);
            assert_eq!((r.x, r.y), profile.outcomes(r.pair), "{} trial {}", model.name(), r.trial);
        }
    }
}

#[test]
fn singlet_estimates_within_five_sigma() {
    let angles = AngleSet::<f64>::default();
    let runs = 200;
    let mut ok = 0;
    for seed in 0..runs {
        let art = harness::run(&config(ModelKind::QuantumSinglet, 4_000, Mode::Actual, 1000 + seed)).unwrap();
        let (an, _) = stats::analyze_run::<f64>(art.actual().unwrap(), 1, 5.0);
        let all = an.correlations.iter().all(|e| {
            let (l1, l2) = e.pair.labels();
            let expected = -(angles.angle(l1) - angles.angle(l2)).cos();
            (e.mean - expected).abs() <= 5.0 * e.stderr.max(1e-9)
        });
        ok += all as u64;
    }
    assert!(ok * 100 >= runs * 99, "{ok}/{runs}");
}

#[test]
fn quantum_singlet_has_no_potential_values() {
    let art = harness::run(&config(ModelKind::QuantumSinglet, 100, Mode::Counterfactual, 1)).unwrap();
    assert!(art.counterfactual().unwrap().iter().all(|r| !r.is_supported()));
    let mut bytes = Vec::new();
    write_artifact(&art, &mut bytes).unwrap();
    assert_eq!(read_artifact::<f64, _>(&bytes[..]).unwrap(), art);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn artifacts_round_trip(
        seed in any::<u64>(),
        n in 1u64..300,
        model in prop::sample::select(ModelKind::ALL.to_vec()),
        cf in any::<bool>(),
    ) {
        let mode = if cf { Mode::Counterfactual } else { Mode::Actual };
        let art = harness::run(&config(model, n, mode, seed)).unwrap();
        let mut bytes = Vec::new();
        write_artifact(&art, &mut bytes).unwrap();
        let back = read_artifact::<f64, _>(&bytes[..]).unwrap();
        prop_assert_eq!(&back, &art);
        let mut again = Vec::new();
        write_artifact(&back, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }
}
