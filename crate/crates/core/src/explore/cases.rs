//! Scripted five-process scenarios. Processes are numbered from 1 here to
//! match the usual presentation: `P1` is index 0 and its value is byte 0x01.

use std::fmt;

use serde::Serialize;

use super::properties::{evaluate, PropertyReport};
use crate::protocol::Kind;
use crate::sim::{
    run_scenario, Configuration, CrashSpec, Filter, ScenarioConfig, SchedulerSpec, ScriptStep, SimError, Trace,
};
use crate::value::VectorValue;

const N: usize = 5;

/// Expected shape of a vector: full, or missing exactly the value of `P{k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Shape {
    Full,
    Missing(usize),
}

impl Shape {
    fn of(v: &VectorValue) -> Option<Shape> {
        match v.null_index() {
            None if v.is_full() => Some(Shape::Full),
            Some(k) if v.null_count() == 1 => Some(Shape::Missing(k + 1)),
            _ => None,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Full => f.write_str("V^F"),
            Shape::Missing(k) => write!(f, "V^0(-v{k})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseDef {
    pub id: &'static str,
    pub title: &'static str,
    pub scenario: ScenarioConfig,
    /// Per process, indexed from P1; `None` is not checked.
    pub completions: [Option<Shape>; N],
    /// What every live decider must decide, if checked.
    pub decision: Option<Shape>,
    /// Processes that must have applied the Update Rule.
    pub updated: &'static [usize],
    /// A literal reading of a general claim. A mismatch refutes the claim
    /// instead of failing the suite.
    pub literal: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub id: &'static str,
    pub title: &'static str,
    pub literal: bool,
    pub mismatches: Vec<String>,
    pub completions: Vec<Option<String>>,
    pub decisions: Vec<Option<String>>,
    pub report: PropertyReport,
    #[serde(skip)]
    pub trace: Trace,
}

impl CaseResult {
    pub fn matched(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Literal variants never fail the suite.
    pub fn passed(&self) -> bool {
        self.literal || self.matched()
    }

    pub fn summary(&self) -> String {
        let status = match (self.matched(), self.literal) {
            (true, false) => "ok",
            (false, false) => "MISMATCH",
            (true, true) => "literal claim holds",
            (false, true) => "literal claim refuted",
        };
        let comp: Vec<String> = self.completions.iter().map(|c| c.clone().unwrap_or_else(|| "-".into())).collect();
        let dec: Vec<String> = self.decisions.iter().map(|c| c.clone().unwrap_or_else(|| "-".into())).collect();
        let mut line = format!(
            "case {:<6} {:<60} {status}: completions [{}] decisions [{}]",
            self.id,
            self.title,
            comp.join(" "),
            dec.join(" ")
        );
        if !self.mismatches.is_empty() {
            line.push_str(&format!(" ({})", self.mismatches.join("; ")));
        }
        line
    }
}

fn p(k: usize) -> usize {
    k - 1
}

fn deliver(from: usize, to: usize, kind: Kind) -> ScriptStep {
    ScriptStep::deliver(p(from), p(to), kind)
}

/// Initial-value receipts: for each receiver, the senders it hears first.
fn receipts(pattern: &[(usize, &[usize])]) -> Vec<ScriptStep> {
    pattern.iter().flat_map(|&(to, froms)| froms.iter().map(move |&from| deliver(from, to, Kind::Initial))).collect()
}

/// Receipts, then the remaining initial values, then all first proposals,
/// then everything else oldest first.
fn standard(pattern: &[(usize, &[usize])]) -> Vec<ScriptStep> {
    let mut s = receipts(pattern);
    s.push(ScriptStep::deliver_all(Kind::Initial));
    s.push(ScriptStep::deliver_all(Kind::First));
    s.push(ScriptStep::drain());
    s
}

/// Four processes miss v5; P4 learns v5 early and misses v3.
const PATTERN_EARLY: &[(usize, &[usize])] =
    &[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 5]), (5, &[1, 2, 3])];
/// P1..P4 miss v5, P5 misses v4.
const PATTERN_LATE: &[(usize, &[usize])] =
    &[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 3]), (5, &[1, 2, 3])];

fn scenario(script: Vec<ScriptStep>, crash: Option<CrashSpec>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(N).with_scheduler(SchedulerSpec::Scripted { script });
    cfg.crash = crash;
    cfg
}

fn before(k: usize, kind: Kind) -> Option<CrashSpec> {
    Some(CrashSpec::before(p(k), kind))
}

fn during(k: usize, kind: Kind, to: &[usize]) -> Option<CrashSpec> {
    Some(CrashSpec::during(p(k), kind, &to.iter().map(|&t| p(t)).collect::<Vec<_>>()))
}

fn after(k: usize, kind: Kind) -> Option<CrashSpec> {
    Some(CrashSpec::after(p(k), kind))
}

use Shape::{Full as F, Missing as M};

fn case(
    id: &'static str,
    title: &'static str,
    scenario: ScenarioConfig,
    completions: [Option<Shape>; N],
    decision: Option<Shape>,
) -> CaseDef {
    CaseDef { id, title, scenario, completions, decision, updated: &[], literal: false }
}

/// The borderline decision illustration: P1 and P2 complete with the full
/// vector, P3..P5 without v5, and no full vector reaches P1 or P2 among
/// their first seeds.
fn borderline_script() -> Vec<ScriptStep> {
    use Kind::{First, Second, Seed};
    let mut s = receipts(PATTERN_LATE);
    s.push(ScriptStep::deliver_all(Kind::Initial));
    s.extend([
        deliver(1, 3, First),
        deliver(2, 3, First),
        deliver(4, 3, First),
        deliver(1, 4, First),
        deliver(2, 4, First),
        deliver(3, 4, First),
        deliver(1, 5, First),
        deliver(2, 5, First),
        deliver(3, 5, First),
        deliver(5, 1, First),
        deliver(2, 1, First),
        deliver(3, 1, First),
        deliver(5, 2, First),
        deliver(1, 2, First),
        deliver(3, 2, First),
        deliver(5, 3, First),
        // P3's seed precedes its second proposal and waits for Decision
        deliver(5, 1, Second),
        deliver(2, 1, Second),
        deliver(3, 1, Seed),
        deliver(3, 1, Second),
        deliver(5, 2, Second),
        deliver(1, 2, Second),
        deliver(3, 2, Seed),
        deliver(3, 2, Second),
        // decision sets: P1 and P2 see only P3..P5
        deliver(4, 1, First),
        deliver(4, 1, Seed),
        deliver(5, 1, Seed),
        deliver(4, 2, First),
        deliver(4, 2, Seed),
        deliver(5, 2, Seed),
        // P3..P5 see P2's full vector
        deliver(2, 3, Second),
        deliver(2, 3, Seed),
        deliver(4, 3, Seed),
        deliver(5, 3, Second),
        deliver(5, 3, Seed),
        deliver(2, 4, Second),
        deliver(2, 4, Seed),
        deliver(3, 4, Seed),
        deliver(5, 4, First),
        deliver(5, 4, Second),
        deliver(5, 4, Seed),
        deliver(2, 5, Second),
        deliver(2, 5, Seed),
        deliver(3, 5, Seed),
        deliver(4, 5, Seed),
    ]);
    s.push(ScriptStep::drain());
    s
}

/// Every scripted case, in presentation order.
pub fn case_definitions() -> Vec<CaseDef> {
    use Kind::{First, Initial, Second, Seed};
    let all_m5 = [Some(M(5)); N];
    let early = [Some(F), Some(F), Some(F), Some(M(5)), Some(M(5))];
    let others_m5 = [None, Some(M(5)), Some(M(5)), Some(M(5)), Some(M(5))];
    let mut v = vec![
        case(
            "1",
            "no crash, one early receiver of the slow value",
            scenario(standard(PATTERN_EARLY), None),
            early,
            Some(F),
        ),
        case("2", "no crash, slow value learned late", scenario(standard(PATTERN_LATE), None), all_m5, Some(M(5))),
        case(
            "3",
            "crash before initial value",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 3])]),
                before(5, Initial),
            ),
            [Some(M(5)), Some(M(5)), Some(M(5)), Some(M(5)), None],
            Some(M(5)),
        ),
        case(
            "4a",
            "crash while sending initial value, receivers already past it",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 3])]),
                during(5, Initial, &[1]),
            ),
            [Some(M(5)), Some(M(5)), Some(M(5)), Some(M(5)), None],
            Some(M(5)),
        ),
        case(
            "4b",
            "crash while sending initial value, two early receivers",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 5]), (4, &[1, 2, 5])]),
                during(5, Initial, &[3, 4]),
            ),
            [Some(F), Some(F), Some(F), Some(F), None],
            Some(F),
        ),
        CaseDef {
            literal: true,
            ..case(
                "4b-lit",
                "crash while sending initial value, single early receiver",
                scenario(
                    standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 5])]),
                    during(5, Initial, &[4]),
                ),
                [Some(F), Some(F), Some(F), Some(F), None],
                Some(F),
            )
        },
        case(
            "5a",
            "crash after initial value, receivers already past it",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 3])]),
                after(5, Initial),
            ),
            [Some(M(5)), Some(M(5)), Some(M(5)), Some(M(5)), None],
            Some(M(5)),
        ),
        case(
            "5b",
            "crash after initial value, two early receivers",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 5]), (4, &[1, 2, 5])]),
                after(5, Initial),
            ),
            [Some(F), Some(F), Some(F), Some(F), None],
            Some(F),
        ),
        CaseDef {
            literal: true,
            ..case(
                "5b-lit",
                "crash after initial value, single early receiver",
                scenario(
                    standard(&[(1, &[2, 3, 4]), (2, &[1, 3, 4]), (3, &[1, 2, 4]), (4, &[1, 2, 5])]),
                    after(5, Initial),
                ),
                [Some(F), Some(F), Some(F), Some(F), None],
                Some(F),
            )
        },
        case(
            "6",
            "crash before first proposal",
            scenario(standard(PATTERN_LATE), before(5, First)),
            [Some(M(5)), Some(M(5)), Some(M(5)), Some(M(5)), None],
            Some(M(5)),
        ),
        case(
            "7.1",
            "crash while sending first proposal, scenario 1",
            scenario(
                standard(&[(1, &[2, 3, 4]), (2, &[1, 4, 5]), (3, &[2, 4, 5]), (4, &[2, 3, 5]), (5, &[1, 2, 3])]),
                during(1, First, &[2]),
            ),
            [None, Some(F), Some(F), Some(F), Some(F)],
            Some(F),
        ),
        case(
            "7.2",
            "crash while sending first proposal, scenario 2",
            scenario(
                standard(&[(2, &[1, 4, 5]), (3, &[2, 4, 5]), (4, &[2, 3, 5]), (5, &[2, 3, 4]), (1, &[2, 3, 4])]),
                during(1, First, &[2]),
            ),
            [None, Some(M(1)), Some(F), Some(F), Some(F)],
            Some(F),
        ),
    ];
    let after_first = [None, Some(F), Some(F), Some(M(5)), Some(M(5))];
    for (id, title, crash) in [
        ("8", "crash after first proposal", after(1, First)),
        ("9", "crash while sending second proposal", during(1, Second, &[2])),
        ("10", "crash after second proposal", after(1, Second)),
    ] {
        v.push(case(
            leak(format!("{id}a")),
            leak(format!("{title}, early-receiver pattern")),
            scenario(standard(PATTERN_EARLY), crash.clone()),
            after_first,
            Some(F),
        ));
        v.push(case(
            leak(format!("{id}b")),
            leak(format!("{title}, late pattern")),
            scenario(standard(PATTERN_LATE), crash),
            others_m5,
            Some(M(5)),
        ));
    }
    v.push(CaseDef {
        updated: &[3, 4, 5],
        ..case(
            "11",
            "two full vectors enter decision, borderline seeds",
            scenario(borderline_script(), None),
            [Some(F), Some(F), Some(M(5)), Some(M(5)), Some(M(5))],
            Some(F),
        )
    });
    v.push(case("12", "all enter decision missing v5", scenario(standard(PATTERN_LATE), None), all_m5, Some(M(5))));
    for (id, title, crash) in [
        ("13", "crash before decision seed", before(1, Seed)),
        ("14", "crash while sending decision seed", during(1, Seed, &[2])),
        ("15", "crash after decision seed", after(1, Seed)),
    ] {
        v.push(case(
            leak(format!("{id}a")),
            leak(format!("{title}, full vectors present")),
            scenario(standard(PATTERN_EARLY), crash.clone()),
            early,
            Some(F),
        ));
        v.push(case(
            leak(format!("{id}b")),
            leak(format!("{title}, no full vector")),
            scenario(standard(PATTERN_LATE), crash),
            all_m5,
            Some(M(5)),
        ));
    }
    v
}

fn leak(s: String) -> &'static str {
    Box::leak(s.into_boxed_str())
}

fn check(def: &CaseDef, config: &Configuration) -> Vec<String> {
    let mut out = Vec::new();
    for (i, want) in def.completions.iter().enumerate() {
        let Some(want) = want else { continue };
        let got = config.states()[i].completion().and_then(Shape::of);
        if got != Some(*want) {
            out.push(format!("P{} completed {} not {want}", i + 1, got.map_or("nothing".into(), |s| s.to_string())));
        }
    }
    if let Some(want) = def.decision {
        for s in config.live() {
            let got = s.decided().and_then(Shape::of);
            if got != Some(want) {
                out.push(format!(
                    "P{} decided {} not {want}",
                    s.id().0 + 1,
                    got.map_or("nothing".into(), |s| s.to_string())
                ));
            }
        }
    }
    for &k in def.updated {
        if !config.states()[k - 1].updated() {
            out.push(format!("P{k} did not apply the Update Rule"));
        }
    }
    out
}

pub fn run_case(def: &CaseDef) -> Result<CaseResult, SimError> {
    let trace = run_scenario(&def.scenario)?;
    let config = crate::sim::replay(&trace)?;
    let report = evaluate(&config, Some(trace.verdict.stop));
    let show = |v: Option<&VectorValue>| v.and_then(Shape::of).map(|s| s.to_string());
    Ok(CaseResult {
        id: def.id,
        title: def.title,
        literal: def.literal,
        mismatches: check(def, &config),
        completions: config.states().iter().map(|s| show(s.completion())).collect(),
        decisions: config.states().iter().map(|s| show(s.decided())).collect(),
        report,
        trace,
    })
}

/// Run every case. Errors only if a script cannot be executed.
pub fn run_case_suite() -> Result<Vec<CaseResult>, SimError> {
    case_definitions().iter().map(run_case).collect()
}

/// Run every case with other initial values. Schedules do not depend on
/// the values, so the shapes and expectations carry over.
pub fn run_case_suite_with_values(values: &[crate::value::InitialValue]) -> Result<Vec<CaseResult>, SimError> {
    case_definitions()
        .into_iter()
        .map(|mut def| {
            def.scenario.initial_values = values.to_vec();
            run_case(&def)
        })
        .collect()
}

/// A crash-free schedule in which exactly one process completes Proposals
/// with the full vector and then decides differently from everyone else:
/// P1 sees two equal first proposals and three second proposals before a
/// third equal first proposal, while P2..P5 see three equal first proposals
/// first. P1's seed is held back until the others have decided.
pub fn split_decision_scenario() -> ScenarioConfig {
    use Kind::{First, Second};
    let mut s = receipts(PATTERN_LATE);
    s.push(ScriptStep::deliver_all(Kind::Initial));
    s.extend([
        deliver(5, 1, First),
        deliver(2, 1, First),
        deliver(3, 1, First),
        deliver(5, 2, First),
        deliver(1, 2, First),
        deliver(3, 2, First),
        deliver(4, 2, First),
        deliver(5, 3, First),
        deliver(1, 3, First),
        deliver(2, 3, First),
        deliver(4, 3, First),
        deliver(1, 4, First),
        deliver(2, 4, First),
        deliver(3, 4, First),
        deliver(1, 5, First),
        deliver(2, 5, First),
        deliver(3, 5, First),
        deliver(5, 1, Second),
        deliver(2, 1, Second),
        deliver(3, 1, Second),
    ]);
    s.push(ScriptStep::DeliverAll { filter: Filter { from: Some(vec![1, 2, 3, 4]), ..Filter::default() } });
    s.push(ScriptStep::drain());
    scenario(s, None)
}
