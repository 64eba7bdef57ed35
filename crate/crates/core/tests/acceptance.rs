//! Acceptance criteria, one line each. Runs sequentially so the timings mean
//! something; exits non-zero if any criterion is red.

use std::time::{Duration, Instant};

use veclab::binary::{binary_from_async, bit_values, commutativity_check};
use veclab::explore::{
    check_properties, explore, fuzz, run_case_suite, run_case_suite_with_values, ExploreOptions, ExploreOutcome,
    FuzzOptions, FuzzReport,
};
use veclab::protocol::Mutant;
use veclab::sim::{replay, ScenarioConfig, Trace};

const CASE_SUITE_LIMIT: Duration = Duration::from_secs(1);
const COMMUTE_LIMIT: Duration = Duration::from_secs(10);
const FUZZ_LIMIT: Duration = Duration::from_secs(300);
const FUZZ_PLAN: [(usize, u64); 3] = [(5, 10_000), (6, 1_000), (7, 1_000)];
const FAIRNESS_BOUND: u64 = 64;
const MAX_EVENTS: u64 = 10_000;
const EXPLORE_MAX_CONFIGS: u64 = 5_000_000;
const EXPLORE_MIN_VISITED: u64 = 1_000_000;
const EXPLORE_WORKERS: usize = 4;

/// Bit inputs used wherever a run is lifted to a binary decision.
fn bits_for(n: usize) -> Vec<u8> {
    [1, 1, 0, 0, 1, 0, 1].into_iter().take(n).collect()
}

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: u8, name: &'static str, pass: bool, detail: String) {
    println!("criterion {id} {name}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, name, pass, detail });
}

fn fuzz_options(n: usize, seeds: u64) -> FuzzOptions {
    let mut o = FuzzOptions::new(n, seeds);
    o.fairness_bound = FAIRNESS_BOUND;
    o.max_events = MAX_EVENTS;
    o
}

/// Strict replay reproduces the recorded configuration hash.
fn replays_to_hash(t: &Trace) -> bool {
    replay(t).is_ok_and(|c| veclab::canonical::hash_hex(c.canonical_hash()) == t.verdict.config_hash)
}

fn main() {
    let mut lines = Vec::new();
    let mut emitted: Vec<(String, Trace)> = Vec::new();

    // 1
    let start = Instant::now();
    let cases = run_case_suite().expect("case scripts execute");
    let elapsed = start.elapsed();
    for r in &cases {
        println!("  {}", r.summary());
    }
    let mismatched: Vec<&str> = cases.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    let unsafe_cases: Vec<&str> = cases
        .iter()
        .filter(|r| !r.literal && !(r.report.agreement.is_pass() && r.report.validity.is_pass()))
        .map(|r| r.id)
        .collect();
    let refuted = cases.iter().filter(|r| r.literal && !r.matched()).count();
    report(
        &mut lines,
        1,
        "case-suite fidelity",
        mismatched.is_empty() && unsafe_cases.is_empty() && elapsed < CASE_SUITE_LIMIT,
        format!(
            "{} cases, exact mismatches {:?}, safety failures {:?}, literal variants refuted {refuted}, {:.3}s (limit {:?})",
            cases.len(),
            mismatched,
            unsafe_cases,
            elapsed.as_secs_f64(),
            CASE_SUITE_LIMIT
        ),
    );
    emitted.extend(cases.iter().map(|r| (format!("case {}", r.id), r.trace.clone())));

    // 2
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [5, 6] {
        for tie in [0, 1] {
            let r = commutativity_check(n, tie).expect("supported n");
            ok &= r.mismatches.is_empty() && r.instances == (1 << n) * (n + 1);
            detail.push(format!("n={n} tie={tie}: {}/{} mismatches", r.mismatches.len(), r.instances));
        }
    }
    let elapsed = start.elapsed();
    report(
        &mut lines,
        2,
        "commutativity",
        ok && elapsed < COMMUTE_LIMIT,
        format!("{}; {:.3}s (limit {:?})", detail.join(", "), elapsed.as_secs_f64(), COMMUTE_LIMIT),
    );

    // 4 runs before 3: the lift is checked inside each fuzz run.
    let start = Instant::now();
    let mut fuzz_reports: Vec<FuzzReport> = Vec::new();
    for (n, seeds) in FUZZ_PLAN {
        let mut o = fuzz_options(n, seeds);
        o.initial_values = Some(bit_values(&bits_for(n)));
        o.binary_lift = true;
        let r = fuzz(&o).expect("fuzz runs");
        println!("  {}", r.summary().replace('\n', "\n  "));
        fuzz_reports.push(r);
    }
    let fuzz_elapsed = start.elapsed();
    let mut consistent = true;
    let mut verdicts = Vec::new();
    for r in &fuzz_reports {
        match &r.counterexample {
            None => verdicts.push(format!("n={} all pass", r.n)),
            Some(c) => {
                let min = c.minimized.as_ref();
                let min_replays = min.is_some_and(|m| replay(m).is_ok());
                let same = replay(&c.trace).is_ok_and(|_| {
                    check_properties(&c.trace).is_ok_and(|p| p.first_failure().map(|f| f.0) == Some(c.property))
                });
                consistent &= c.replays && same && c.minimized_fails && min_replays;
                verdicts.push(format!(
                    "n={} counterexample {} (seed {}, grid {}), replays {}, minimized {}->{} still fails {}",
                    r.n,
                    c.property,
                    c.seed,
                    c.grid_index,
                    c.replays && same,
                    c.original_events,
                    c.minimized_events,
                    c.minimized_fails && min_replays
                ));
                emitted.push((format!("fuzz n={} counterexample", r.n), c.trace.clone()));
                if let Some(m) = min {
                    emitted.push((format!("fuzz n={} minimized", r.n), m.clone()));
                }
            }
        }
    }
    let runs: u64 = fuzz_reports.iter().map(|r| r.runs).sum();
    let expected_runs: u64 = FUZZ_PLAN.iter().map(|&(n, s)| s * (1 + 20 * n as u64)).sum();
    let line4 = (
        consistent && runs == expected_runs && fuzz_elapsed < FUZZ_LIMIT,
        format!(
            "{}; {runs} runs (expected {expected_runs}), {:.1}s (limit {:?})",
            verdicts.join("; "),
            fuzz_elapsed.as_secs_f64(),
            FUZZ_LIMIT
        ),
    );

    // 3
    let mut checked = 0u64;
    let mut failed = 0u64;
    let lifted_cases = run_case_suite_with_values(&bit_values(&bits_for(5))).expect("case scripts execute");
    for r in lifted_cases.iter().filter(|r| r.report.agreement.is_pass()) {
        for tie in [0, 1] {
            checked += 1;
            if binary_from_async(&r.trace, tie).is_err() {
                failed += 1;
            }
        }
    }
    let case_checked = checked;
    for r in &fuzz_reports {
        checked += r.lift.checked;
        failed += r.lift.failed;
    }
    report(
        &mut lines,
        3,
        "binary lift",
        failed == 0 && case_checked > 0 && checked > case_checked,
        format!("{checked} lifts over agreeing traces ({case_checked} from cases), {failed} without a single bit"),
    );
    report(&mut lines, 4, "fuzz verdict", line4.0, line4.1);

    // 5
    let scenario = ScenarioConfig::new(5);
    let mut opts = ExploreOptions { max_configs: EXPLORE_MAX_CONFIGS, workers: 1, ..ExploreOptions::default() };
    let start = Instant::now();
    let one = explore(&scenario, &opts).expect("explore runs");
    let t1 = start.elapsed();
    opts.workers = EXPLORE_WORKERS;
    let start = Instant::now();
    let many = explore(&scenario, &opts).expect("explore runs");
    let tn = start.elapsed();
    println!("  1 worker ({:.1}s): {}", t1.as_secs_f64(), one.summary().replace('\n', "\n  "));
    println!("  {EXPLORE_WORKERS} workers ({:.1}s): {}", tn.as_secs_f64(), many.summary().replace('\n', "\n  "));
    let identical = one == many;
    let acceptable = match &one.outcome {
        ExploreOutcome::AllPass => true,
        ExploreOutcome::Counterexample { property, trace, .. } => {
            emitted.push(("explore counterexample".into(), (**trace).clone()));
            replay(trace).is_ok() && check_properties(trace).is_ok_and(|p| p.status(*property).is_fail())
        }
        ExploreOutcome::BoundExhausted => one.stats.configs_visited >= EXPLORE_MIN_VISITED,
    };
    let verdict = match &one.outcome {
        ExploreOutcome::AllPass => "all pass".to_string(),
        ExploreOutcome::Counterexample { property, .. } => format!("counterexample {property}"),
        ExploreOutcome::BoundExhausted => format!("bound exhausted after {} configs", one.stats.configs_visited),
    };
    report(
        &mut lines,
        5,
        "exhaustive small instance",
        identical && acceptable,
        format!(
            "n=5 no crash, max-configs {EXPLORE_MAX_CONFIGS}: {verdict}; 1 vs {EXPLORE_WORKERS} workers identical {identical}"
        ),
    );

    // 6
    let mut caught = Vec::new();
    let mut all_caught = true;
    for m in Mutant::ALL {
        let (n, max_seeds) = FUZZ_PLAN[0];
        let mut seeds = 100;
        let found = loop {
            let mut o = fuzz_options(n, seeds);
            o.rules = m.rules();
            o.minimize = false;
            let r = fuzz(&o).expect("fuzz runs");
            if r.failing_runs > 0 {
                let c = r.counterexample.expect("failing run recorded");
                break Some(format!("{}: {} at seed {} grid {}", m.name(), c.property, c.seed, c.grid_index));
            }
            if seeds >= max_seeds {
                break None;
            }
            seeds = (seeds * 10).min(max_seeds);
        };
        all_caught &= found.is_some();
        caught.push(found.unwrap_or_else(|| format!("{}: not caught", m.name())));
    }
    report(&mut lines, 6, "mutation sensitivity", all_caught, caught.join("; "));

    // 7
    let bad: Vec<&str> = emitted.iter().filter(|(_, t)| !replays_to_hash(t)).map(|(l, _)| l.as_str()).collect();
    let (n, seeds) = FUZZ_PLAN[1];
    let mut o = fuzz_options(n, seeds);
    o.initial_values = Some(bit_values(&bits_for(n)));
    o.binary_lift = true;
    o.workers = 1;
    let again = fuzz(&o).expect("fuzz runs");
    let same_report = fuzz_reports.contains(&again);
    report(
        &mut lines,
        7,
        "determinism",
        bad.is_empty() && same_report,
        format!(
            "{} emitted traces replayed, hash mismatches {:?}; n={n} fuzz rerun on 1 worker identical {same_report}",
            emitted.len(),
            bad
        ),
    );

    println!();
    for l in &lines {
        println!("criterion {} {:<28} {}", l.id, l.name, if l.pass { "PASS" } else { "FAIL" });
    }
    let red: Vec<u8> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if !red.is_empty() {
        eprintln!("red criteria: {red:?}");
        for l in lines.iter().filter(|l| !l.pass) {
            eprintln!("  {}: {}", l.id, l.detail);
        }
        std::process::exit(1);
    }
}
