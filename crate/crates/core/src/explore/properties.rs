use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::{replay, Configuration, SimError, StopReason, Trace};
use crate::value::{ProcessId, VectorValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Agreement,
    Validity,
    Termination,
    /// All completions with a missing value miss the same one.
    SameNullIndex,
    /// The number of processes completing Proposals with the full vector is never exactly one.
    NotExactlyOneFull,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Agreement,
        Property::Validity,
        Property::Termination,
        Property::SameNullIndex,
        Property::NotExactlyOneFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Agreement => "agreement",
            Property::Validity => "validity",
            Property::Termination => "termination",
            Property::SameNullIndex => "same-null-index",
            Property::NotExactlyOneFull => "not-exactly-one-full",
        }
    }

    /// Safety properties can be judged at any configuration.
    pub fn is_safety(self) -> bool {
        self != Property::Termination
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail(String),
    /// Not decidable from this configuration, e.g. a run cut short.
    Inconclusive(String),
}

impl Status {
    pub fn is_fail(&self) -> bool {
        matches!(self, Status::Fail(_))
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Status::Pass)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => f.write_str("pass"),
            Status::Fail(d) => write!(f, "FAIL ({d})"),
            Status::Inconclusive(d) => write!(f, "inconclusive ({d})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub agreement: Status,
    pub validity: Status,
    pub termination: Status,
    pub same_null_index: Status,
    pub not_exactly_one_full: Status,
    pub decided_count: usize,
}

impl PropertyReport {
    pub fn status(&self, p: Property) -> &Status {
        match p {
            Property::Agreement => &self.agreement,
            Property::Validity => &self.validity,
            Property::Termination => &self.termination,
            Property::SameNullIndex => &self.same_null_index,
            Property::NotExactlyOneFull => &self.not_exactly_one_full,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = (Property, &str)> {
        Property::ALL.into_iter().filter_map(|p| match self.status(p) {
            Status::Fail(d) => Some((p, d.as_str())),
            _ => None,
        })
    }

    pub fn first_failure(&self) -> Option<(Property, String)> {
        self.failures().next().map(|(p, d)| (p, d.to_owned()))
    }

    /// No property failed.
    pub fn is_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in Property::ALL {
            write!(f, "{}={} ", p, self.status(p))?;
        }
        write!(f, "decided={}", self.decided_count)
    }
}

fn decided(config: &Configuration) -> impl Iterator<Item = (ProcessId, &VectorValue)> {
    config.states().iter().filter_map(|s| s.decided().map(|v| (s.id(), v)))
}

pub fn agreement(config: &Configuration) -> Status {
    let mut it = decided(config);
    let Some((p0, v0)) = it.next() else { return Status::Pass };
    match it.find(|(_, v)| *v != v0) {
        Some((p, v)) => Status::Fail(format!("{p0} decided {v0} but {p} decided {v}")),
        None => Status::Pass,
    }
}

pub fn validity(config: &Configuration) -> Status {
    for (p, v) in decided(config) {
        if v.len() != config.n() {
            return Status::Fail(format!("{p} decided {v} of length {}", v.len()));
        }
        if v.null_count() > 1 {
            return Status::Fail(format!("{p} decided {v} with {} missing values", v.null_count()));
        }
        for (k, slot) in v.slots().iter().enumerate() {
            if let Some(x) = slot {
                if x != config.state(ProcessId(k)).input() {
                    return Status::Fail(format!("{p} decided {v}: slot {k} is not p{k}'s input"));
                }
            }
        }
    }
    Status::Pass
}

pub fn termination(config: &Configuration, stop: Option<StopReason>) -> Status {
    let undecided: Vec<String> = config.live().filter(|s| s.decided().is_none()).map(|s| s.id().to_string()).collect();
    if undecided.is_empty() {
        return Status::Pass;
    }
    match stop {
        Some(StopReason::Quiescent) | Some(StopReason::EventBound) => Status::Fail(format!(
            "{} undecided with {} undelivered at {}",
            undecided.join(","),
            config.buffer().len(),
            stop.expect("matched")
        )),
        Some(StopReason::SchedulerExhausted) => Status::Inconclusive("schedule ended early".into()),
        _ => Status::Inconclusive("run in progress".into()),
    }
}

pub fn same_null_index(config: &Configuration) -> Status {
    let mut first: Option<(ProcessId, usize)> = None;
    for s in config.states() {
        if let Some(k) = s.completion().and_then(VectorValue::null_index) {
            match first {
                None => first = Some((s.id(), k)),
                Some((p, k0)) if k0 != k => {
                    return Status::Fail(format!("{p} completed missing slot {k0}, {} missing slot {k}", s.id()))
                }
                _ => {}
            }
        }
    }
    Status::Pass
}

pub fn not_exactly_one_full(config: &Configuration) -> Status {
    let full: Vec<ProcessId> =
        config.states().iter().filter(|s| s.completion().is_some_and(VectorValue::is_full)).map(|s| s.id()).collect();
    if full.len() >= 2 {
        return Status::Pass;
    }
    if config.live().any(|s| s.completion().is_none()) {
        return Status::Inconclusive("proposals phase still open".into());
    }
    match full.as_slice() {
        [p] => Status::Fail(format!("only {p} completed with the full vector")),
        _ => Status::Pass,
    }
}

/// Judge a configuration. `stop` is the reason the run ended, if it did.
pub fn evaluate(config: &Configuration, stop: Option<StopReason>) -> PropertyReport {
    PropertyReport {
        agreement: agreement(config),
        validity: validity(config),
        termination: termination(config, stop),
        same_null_index: same_null_index(config),
        not_exactly_one_full: not_exactly_one_full(config),
        decided_count: decided(config).count(),
    }
}

/// First failing safety property at this configuration.
pub fn safety_violation(config: &Configuration) -> Option<(Property, String)> {
    type Check = fn(&Configuration) -> Status;
    let checks: [(Property, Check); 4] = [
        (Property::Agreement, agreement),
        (Property::Validity, validity),
        (Property::SameNullIndex, same_null_index),
        (Property::NotExactlyOneFull, not_exactly_one_full),
    ];
    checks.into_iter().find_map(|(p, f)| match f(config) {
        Status::Fail(d) => Some((p, d)),
        _ => None,
    })
}

/// Replay the trace bit-exactly and judge its final configuration.
pub fn check_properties(trace: &Trace) -> Result<PropertyReport, SimError> {
    let config = replay(trace)?;
    Ok(evaluate(&config, Some(trace.verdict.stop)))
}
