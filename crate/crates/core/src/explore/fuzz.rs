use rayon::prelude::*;
use serde::Serialize;

use super::minimize::minimize;
use super::properties::{check_properties, evaluate, Property, Status};
use crate::binary::binary_from_async;
use crate::protocol::{Kind, Rules};
use crate::sim::{
    replay, run, CrashPoint, CrashSpec, ScenarioConfig, SchedulerSpec, SeededRandom, SimError, StopReason, Trace,
};
use crate::value::{InitialValue, ProcessId};

#[derive(Clone, Debug)]
pub struct FuzzOptions {
    pub n: usize,
    pub seeds: u64,
    pub fairness_bound: u64,
    pub max_events: u64,
    pub rules: Rules,
    /// Zero uses every available core.
    pub workers: usize,
    pub minimize: bool,
    /// Replaces the default distinct initial values.
    pub initial_values: Option<Vec<InitialValue>>,
    /// Apply the binary function, under both tie rules, to every run that
    /// keeps agreement. Needs single-bit initial values.
    pub binary_lift: bool,
}

impl FuzzOptions {
    pub fn new(n: usize, seeds: u64) -> Self {
        FuzzOptions {
            n,
            seeds,
            fairness_bound: crate::sim::DEFAULT_FAIRNESS_BOUND,
            max_events: crate::sim::DEFAULT_MAX_EVENTS,
            rules: Rules::default(),
            workers: 0,
            minimize: true,
            initial_values: None,
            binary_lift: false,
        }
    }
}

/// No crash, then for each victim: before and after each broadcast kind,
/// and during each kind with three delivered-to subsets (first other
/// process, first half of the others, all but the last).
pub fn crash_grid(n: usize) -> Vec<Option<CrashSpec>> {
    let mut grid = vec![None];
    for victim in 0..n {
        let others: Vec<ProcessId> = (0..n).filter(|&i| i != victim).map(ProcessId).collect();
        let subsets = [&others[..1], &others[..others.len() / 2], &others[..others.len() - 1]];
        for kind in Kind::ALL {
            grid.push(Some(CrashSpec { victim: ProcessId(victim), point: CrashPoint::Before(kind) }));
            grid.push(Some(CrashSpec { victim: ProcessId(victim), point: CrashPoint::After(kind) }));
            for s in subsets {
                grid.push(Some(CrashSpec { victim: ProcessId(victim), point: CrashPoint::During(kind, s.to_vec()) }));
            }
        }
    }
    grid
}

fn scenario_for(opts: &FuzzOptions, crash: Option<CrashSpec>, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(opts.n)
        .with_rules(opts.rules)
        .with_scheduler(SchedulerSpec::Random { seed, fairness_bound: opts.fairness_bound });
    if let Some(v) = &opts.initial_values {
        cfg.initial_values = v.clone();
    }
    cfg.crash = crash;
    cfg.bounds.max_events = opts.max_events;
    cfg
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzCounterexample {
    pub seed: u64,
    pub grid_index: usize,
    pub crash: Option<CrashSpec>,
    pub property: Property,
    pub detail: String,
    /// The trace replays to an identical configuration hash and the same failure.
    pub replays: bool,
    /// The minimized trace still fails the same property.
    pub minimized_fails: bool,
    pub original_events: usize,
    pub minimized_events: usize,
    #[serde(skip)]
    pub trace: Trace,
    #[serde(skip)]
    pub minimized: Option<Trace>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropertyCounts {
    pub pass: u64,
    pub fail: u64,
    pub inconclusive: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    pub n: usize,
    pub seeds: u64,
    pub grid_points: usize,
    pub runs: u64,
    pub properties: Vec<(Property, PropertyCounts)>,
    pub stops: Vec<(StopReason, u64)>,
    /// Runs in which at least one property failed.
    pub failing_runs: u64,
    pub counterexample: Option<FuzzCounterexample>,
    pub lift: LiftCounts,
}

/// Binary lifts attempted (one per agreeing run and tie rule) and those
/// that did not yield a single bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LiftCounts {
    pub checked: u64,
    pub failed: u64,
}

impl FuzzReport {
    pub fn all_pass(&self) -> bool {
        self.failing_runs == 0
    }

    pub fn counts(&self, p: Property) -> &PropertyCounts {
        &self.properties.iter().find(|(q, _)| *q == p).expect("all properties present").1
    }

    pub fn summary(&self) -> String {
        let props: Vec<String> = self
            .properties
            .iter()
            .map(|(p, c)| format!("{p}: {} pass / {} fail / {} inconclusive", c.pass, c.fail, c.inconclusive))
            .collect();
        let stops: Vec<String> = self.stops.iter().map(|(s, c)| format!("{s}={c}")).collect();
        let mut out = format!(
            "fuzz n={} seeds={} grid={} runs={} failing={}\n  {}\n  stops: {}",
            self.n,
            self.seeds,
            self.grid_points,
            self.runs,
            self.failing_runs,
            props.join("\n  "),
            stops.join(" ")
        );
        if self.lift.checked > 0 {
            out.push_str(&format!("\n  binary lift: {} checked, {} failed", self.lift.checked, self.lift.failed));
        }
        match &self.counterexample {
            None => out.push_str("\n  verdict: all pass"),
            Some(c) => out.push_str(&format!(
                "\n  verdict: counterexample seed={} grid={} crash={} {}: {}\n  replays={} minimized {} -> {} events, still fails={}",
                c.seed,
                c.grid_index,
                c.crash.as_ref().map_or("none".into(), |c| format!("{c:?}")),
                c.property,
                c.detail,
                c.replays,
                c.original_events,
                c.minimized_events,
                c.minimized_fails
            )),
        }
        out
    }
}

const STOPS: [StopReason; 4] =
    [StopReason::Halted, StopReason::Quiescent, StopReason::EventBound, StopReason::SchedulerExhausted];

#[derive(Clone, Debug, Default)]
struct Tally {
    runs: u64,
    props: [[u64; 3]; 5],
    stops: [u64; 4],
    failing: u64,
    lift: LiftCounts,
    first: Option<(u64, usize, Property, String, Trace)>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.runs += other.runs;
        for i in 0..5 {
            for j in 0..3 {
                self.props[i][j] += other.props[i][j];
            }
        }
        for i in 0..4 {
            self.stops[i] += other.stops[i];
        }
        self.failing += other.failing;
        self.lift.checked += other.lift.checked;
        self.lift.failed += other.lift.failed;
        self.first = match (self.first, other.first) {
            (Some(a), Some(b)) => Some(if (b.0, b.1) < (a.0, a.1) { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn fuzz_seed(opts: &FuzzOptions, grid: &[Option<CrashSpec>], seed: u64) -> Result<Tally, SimError> {
    let mut t = Tally::default();
    for (gi, crash) in grid.iter().enumerate() {
        let cfg = scenario_for(opts, crash.clone(), seed);
        let (trace, config) = run(&cfg, &mut SeededRandom::new(seed, opts.fairness_bound))?;
        let report = evaluate(&config, Some(trace.verdict.stop));
        t.runs += 1;
        t.stops[STOPS.iter().position(|s| *s == trace.verdict.stop).expect("known stop")] += 1;
        for (i, p) in Property::ALL.into_iter().enumerate() {
            let j = match report.status(p) {
                Status::Pass => 0,
                Status::Fail(_) => 1,
                Status::Inconclusive(_) => 2,
            };
            t.props[i][j] += 1;
        }
        if opts.binary_lift && report.agreement.is_pass() && report.decided_count > 0 {
            for tie in [0, 1] {
                t.lift.checked += 1;
                if binary_from_async(&trace, tie).is_err() {
                    t.lift.failed += 1;
                }
            }
        }
        if let Some((p, d)) = report.first_failure() {
            t.failing += 1;
            if t.first.is_none() {
                t.first = Some((seed, gi, p, d, trace));
            }
        }
    }
    Ok(t)
}

/// Seeded-random runs over `0..seeds` crossed with the crash grid. The
/// report does not depend on the number of workers.
pub fn fuzz(opts: &FuzzOptions) -> Result<FuzzReport, SimError> {
    let grid = crash_grid(opts.n);
    let base = scenario_for(opts, None, 0);
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| SimError::Config { field: "workers".into(), message: e.to_string() })?;
    let tally = pool.install(|| {
        (0..opts.seeds)
            .into_par_iter()
            .map(|seed| fuzz_seed(opts, &grid, seed))
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    })?;

    let counterexample = match tally.first {
        None => None,
        Some((seed, grid_index, property, detail, trace)) => {
            let replays =
                replay(&trace).is_ok() && check_properties(&trace).is_ok_and(|r| r.status(property).is_fail());
            let minimized = if opts.minimize { Some(minimize(&trace, property)?) } else { None };
            let minimized_fails = match &minimized {
                Some(m) => check_properties(m).is_ok_and(|r| r.status(property).is_fail()),
                None => false,
            };
            Some(FuzzCounterexample {
                seed,
                grid_index,
                crash: grid[grid_index].clone(),
                property,
                detail,
                replays,
                minimized_fails,
                original_events: trace.events.len(),
                minimized_events: minimized.as_ref().map_or(trace.events.len(), |m| m.events.len()),
                trace,
                minimized,
            })
        }
    };

    Ok(FuzzReport {
        n: opts.n,
        seeds: opts.seeds,
        grid_points: grid.len(),
        runs: tally.runs,
        properties: Property::ALL
            .into_iter()
            .zip(tally.props)
            .map(|(p, [pass, fail, inconclusive])| (p, PropertyCounts { pass, fail, inconclusive }))
            .collect(),
        stops: STOPS.into_iter().zip(tally.stops).collect(),
        failing_runs: tally.failing,
        counterexample,
        lift: tally.lift,
    })
}
