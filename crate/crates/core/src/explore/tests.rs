use proptest::prelude::*;

use super::*;
use crate::protocol::{Kind, Mutant};
use crate::sim::{replay, run_scenario, CrashSpec, ScenarioConfig, SchedulerSpec};
use crate::value::VectorValue;

#[test]
fn case_suite_matches_expectations() {
    let results = run_case_suite().unwrap();
    for r in &results {
        println!("{}", r.summary());
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed()).map(|r| r.summary()).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for r in results.iter().filter(|r| !r.literal) {
        assert!(r.report.agreement.is_pass(), "{}", r.summary());
        assert!(r.report.validity.is_pass(), "{}", r.summary());
        assert!(r.report.termination.is_pass(), "{}", r.summary());
        replay(&r.trace).unwrap();
    }
}

#[test]
fn single_early_receiver_keeps_one_process_on_the_missing_vector() {
    let results = run_case_suite().unwrap();
    for id in ["4b-lit", "5b-lit"] {
        let r = results.iter().find(|r| r.id == id).unwrap();
        assert!(!r.matched(), "{}", r.summary());
        assert_eq!(r.completions[3].as_deref(), Some("V^0(-v5)"));
        assert!(r.report.agreement.is_pass());
    }
}

#[test]
fn all_missing_run_decides_missing_vector_at_slow_slot() {
    let r = run_case_suite().unwrap().into_iter().find(|r| r.id == "12").unwrap();
    let report = check_properties(&r.trace).unwrap();
    assert!(report.agreement.is_pass());
    assert_eq!(report.decided_count, 5);
    let v = r.trace.verdict.outcomes[0].decided().unwrap().clone();
    assert_eq!(v.null_index(), Some(4));
}

#[test]
fn borderline_run_decides_full_vector() {
    let r = run_case_suite().unwrap().into_iter().find(|r| r.id == "11").unwrap();
    let report = check_properties(&r.trace).unwrap();
    assert!(report.agreement.is_pass() && report.not_exactly_one_full.is_pass());
    for o in &r.trace.verdict.outcomes {
        assert!(o.decided().is_some_and(VectorValue::is_full));
    }
}

#[test]
fn split_decision_violates_agreement_without_a_crash() {
    let t = run_scenario(&split_decision_scenario()).unwrap();
    let report = check_properties(&t).unwrap();
    assert!(report.agreement.is_fail(), "{report}");
    assert!(report.not_exactly_one_full.is_fail(), "{report}");
    assert!(report.same_null_index.is_pass());
    assert!(report.validity.is_pass());
    assert!(report.termination.is_pass());
    let min = minimize(&t, Property::Agreement).unwrap();
    assert!(min.events.len() <= t.events.len());
    assert!(check_properties(&min).unwrap().agreement.is_fail());
}

#[test]
fn minimize_rejects_a_passing_trace() {
    let t = run_scenario(&ScenarioConfig::new(5)).unwrap();
    assert!(minimize(&t, Property::Agreement).is_err());
}

#[test]
fn grid_shape() {
    assert_eq!(crash_grid(5).len(), 101);
    assert_eq!(crash_grid(6).len(), 121);
    assert_eq!(crash_grid(7).len(), 141);
    assert!(crash_grid(5)[0].is_none());
    for c in crash_grid(6).into_iter().flatten() {
        c.validate(6).unwrap();
    }
}

#[test]
fn fuzz_report_is_independent_of_workers() {
    let mut o = FuzzOptions::new(5, 12);
    o.workers = 1;
    let a = fuzz(&o).unwrap();
    o.workers = 3;
    let b = fuzz(&o).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.runs, 12 * 101);
    if let Some(c) = &a.counterexample {
        assert!(c.replays && c.minimized_fails, "{}", a.summary());
        assert!(c.minimized_events <= c.original_events);
    }
}

#[test]
fn single_seed_fuzz_matches_a_direct_run() {
    let mut o = FuzzOptions::new(5, 1);
    o.minimize = false;
    let rep = fuzz(&o).unwrap();
    let cfg = ScenarioConfig::new(5).with_scheduler(SchedulerSpec::Random { seed: 0, fairness_bound: 64 });
    let t = run_scenario(&cfg).unwrap();
    let direct = check_properties(&t).unwrap();
    let fails = Property::ALL.iter().filter(|p| direct.status(**p).is_fail()).count() as u64;
    if fails == 0 {
        assert!(rep.counterexample.as_ref().is_none_or(|c| c.grid_index > 0));
    } else {
        assert_eq!(rep.counterexample.as_ref().unwrap().trace, t);
    }
}

#[test]
fn dedupe_does_not_change_reachable_leaves() {
    let cfg = ScenarioConfig::new(5);
    let mut opts =
        ExploreOptions { max_depth: 3, max_configs: u64::MAX, dedupe: true, workers: 1, collect_leaves: true };
    let on = explore(&cfg, &opts).unwrap();
    opts.dedupe = false;
    let off = explore(&cfg, &opts).unwrap();
    assert_eq!(on.leaf_hashes, off.leaf_hashes);
    assert_eq!(on.outcome, off.outcome);
    assert_eq!(on.outcome, ExploreOutcome::BoundExhausted);
    assert!(on.stats.dedupe_hits > 0);
    assert!(on.stats.configs_visited < off.stats.configs_visited);
    assert_eq!(off.stats.configs_visited, 1 + 20 + 20 * 19 + 20 * 19 * 18);
}

#[test]
fn explore_is_independent_of_workers() {
    let cfg = ScenarioConfig::new(5);
    let mut opts = ExploreOptions { max_configs: 30_000, workers: 1, ..ExploreOptions::default() };
    let a = explore(&cfg, &opts).unwrap();
    opts.workers = 4;
    let b = explore(&cfg, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.stats.configs_visited <= 30_000);
}

#[test]
fn explore_counterexample_replays() {
    // a crash before the first proposal leaves room for one lone full vector
    let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::before(4, Kind::First));
    let opts = ExploreOptions { max_configs: 200_000, workers: 1, ..ExploreOptions::default() };
    let rep = explore(&cfg, &opts).unwrap();
    if let ExploreOutcome::Counterexample { property, trace, .. } = &rep.outcome {
        replay(trace).unwrap();
        assert!(check_properties(trace).unwrap().status(*property).is_fail());
    }
}

#[test]
fn mutants_are_caught() {
    for m in Mutant::ALL {
        let mut o = FuzzOptions::new(5, 60);
        o.rules = m.rules();
        o.minimize = false;
        let rep = fuzz(&o).unwrap();
        assert!(rep.failing_runs > 0, "{}: {}", m.name(), rep.summary());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_runs_replay_and_keep_validity(seed in any::<u64>(), n in 5usize..8, gi in 0usize..101) {
        let grid = crash_grid(n);
        let mut cfg = ScenarioConfig::new(n).with_scheduler(SchedulerSpec::Random { seed, fairness_bound: 64 });
        cfg.crash = grid[gi % grid.len()].clone();
        let t = run_scenario(&cfg).unwrap();
        let config = replay(&t).unwrap();
        prop_assert_eq!(&crate::canonical::hash_hex(config.canonical_hash()), &t.verdict.config_hash);
        let report = evaluate(&config, Some(t.verdict.stop));
        prop_assert!(report.validity.is_pass(), "{}", report);
        prop_assert!(report.termination.is_pass(), "{}", report);
        // every live process completed Proposals once it decided
        for s in config.live() {
            if s.decided().is_some() {
                prop_assert!(s.completion().is_some());
            }
        }
        let back = crate::sim::Trace::from_jsonl(&t.to_jsonl()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn bit_valued_cases_lift_to_one_bit() {
    use crate::binary::{bf, binary_from_async, bit_values};
    let results = run_case_suite_with_values(&bit_values(&[1, 1, 0, 0, 1])).unwrap();
    for r in results.iter().filter(|r| !r.literal) {
        assert!(r.passed(), "{}", r.summary());
        for tie in [0, 1] {
            binary_from_async(&r.trace, tie).unwrap();
        }
    }
    let r = results.iter().find(|r| r.id == "12").unwrap();
    let missing = VectorValue::new(bit_values(&[1, 1, 0, 0]).into_iter().map(Some).chain([None]).collect());
    for tie in [0, 1] {
        assert_eq!(binary_from_async(&r.trace, tie).unwrap().bit, bf(&missing, tie).unwrap());
    }
}

#[test]
fn split_decision_has_no_binary_lift() {
    let mut cfg = split_decision_scenario();
    cfg.initial_values = crate::binary::bit_values(&[1, 1, 0, 0, 1]);
    let t = run_scenario(&cfg).unwrap();
    assert!(crate::binary::binary_from_async(&t, 0).is_err());
}

#[test]
fn fuzz_lifts_agreeing_runs() {
    let mut o = FuzzOptions::new(5, 4);
    o.minimize = false;
    o.initial_values = Some(crate::binary::bit_values(&[1, 1, 0, 0, 1]));
    o.binary_lift = true;
    let rep = fuzz(&o).unwrap();
    assert!(rep.lift.checked > 0);
    assert_eq!(rep.lift.failed, 0);
}
