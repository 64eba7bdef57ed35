use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::ScenarioConfig;
use super::network::{EntryKey, Event};
use super::SimError;
use crate::value::VectorValue;

pub const TRACE_FORMAT: &str = "veclab-trace/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every live process decided.
    Halted,
    /// Nothing enabled but some live process has not decided.
    Quiescent,
    /// The event bound was reached first.
    EventBound,
    /// The scheduler declined to pick although events were enabled.
    SchedulerExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Halted => "halted",
            StopReason::Quiescent => "quiescent",
            StopReason::EventBound => "event-bound",
            StopReason::SchedulerExhausted => "scheduler-exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProcessOutcome {
    Decided {
        vector: VectorValue,
    },
    NotDecided,
    /// A crashed process may have decided before it stopped.
    Crashed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decided: Option<VectorValue>,
    },
}

impl ProcessOutcome {
    pub fn decided(&self) -> Option<&VectorValue> {
        match self {
            ProcessOutcome::Decided { vector } => Some(vector),
            ProcessOutcome::Crashed { decided } => decided.as_ref(),
            ProcessOutcome::NotDecided => None,
        }
    }
}

impl fmt::Display for ProcessOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessOutcome::Decided { vector } => write!(f, "{vector}"),
            ProcessOutcome::NotDecided => f.write_str("undecided"),
            ProcessOutcome::Crashed { decided: Some(v) } => write!(f, "crashed after deciding {v}"),
            ProcessOutcome::Crashed { decided: None } => f.write_str("crashed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub outcomes: Vec<ProcessOutcome>,
    pub stop: StopReason,
    pub event_count: u64,
    /// Canonical hash of the final configuration, 16 lowercase hex digits.
    pub config_hash: String,
    pub undelivered: Vec<EntryKey>,
}

/// A complete, replayable run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub scenario: ScenarioConfig,
    pub events: Vec<Event>,
    pub verdict: RunVerdict,
}

fn tagged(value: impl Serialize, kind: &str) -> Map<String, Value> {
    let Value::Object(fields) = serde_json::to_value(value).expect("serializes") else {
        unreachable!("records serialize to objects")
    };
    let mut out = Map::new();
    out.insert("type".into(), kind.into());
    out.extend(fields);
    out
}

impl Trace {
    /// Applied events, excluding automatic crash markers.
    pub fn scheduled_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| !matches!(e, Event::Crash { auto: true, .. }))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut header = tagged(&self.scenario, "header");
        header.insert("format".into(), TRACE_FORMAT.into());
        out.push_str(&Value::Object(header).to_string());
        out.push('\n');
        for (i, ev) in self.events.iter().enumerate() {
            let mut rec = tagged(ev, "event");
            rec.insert("i".into(), i.into());
            out.push_str(&Value::Object(rec).to_string());
            out.push('\n');
        }
        out.push_str(&Value::Object(tagged(&self.verdict, "verdict")).to_string());
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let err = |line: usize, detail: String| SimError::TraceFormat { line, detail };
        let mut scenario = None;
        let mut events = Vec::new();
        let mut verdict = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let mut obj: Map<String, Value> = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
            let kind = obj.remove("type").and_then(|v| v.as_str().map(str::to_owned));
            if verdict.is_some() {
                return Err(err(line, "record after verdict".into()));
            }
            match kind.as_deref() {
                Some("header") => {
                    if scenario.is_some() {
                        return Err(err(line, "second header".into()));
                    }
                    match obj.remove("format") {
                        Some(Value::String(f)) if f == TRACE_FORMAT => {}
                        other => return Err(err(line, format!("unsupported format {other:?}"))),
                    }
                    let s: ScenarioConfig =
                        serde_json::from_value(Value::Object(obj)).map_err(|e| err(line, e.to_string()))?;
                    s.validate().map_err(|e| err(line, e.to_string()))?;
                    scenario = Some(s);
                }
                Some("event") => {
                    if scenario.is_none() {
                        return Err(err(line, "event before header".into()));
                    }
                    let i = obj.remove("i").and_then(|v| v.as_u64());
                    if i != Some(events.len() as u64) {
                        return Err(err(line, format!("expected i={}, got {i:?}", events.len())));
                    }
                    let ev: Event = serde_json::from_value(Value::Object(obj)).map_err(|e| err(line, e.to_string()))?;
                    events.push(ev);
                }
                Some("verdict") => {
                    if scenario.is_none() {
                        return Err(err(line, "verdict before header".into()));
                    }
                    let v: RunVerdict =
                        serde_json::from_value(Value::Object(obj)).map_err(|e| err(line, e.to_string()))?;
                    verdict = Some(v);
                }
                other => return Err(err(line, format!("unknown record type {other:?}"))),
            }
        }
        let last = text.lines().count();
        Ok(Trace {
            scenario: scenario.ok_or_else(|| err(last, "missing header".into()))?,
            events,
            verdict: verdict.ok_or_else(|| err(last, "missing verdict".into()))?,
        })
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }

    pub fn read_from(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::TraceFormat { line: 0, detail: e.to_string() })?;
        Self::from_jsonl(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Kind;
    use crate::sim::{run_scenario, CrashSpec, SchedulerSpec};

    fn sample() -> Trace {
        let cfg = ScenarioConfig::new(5)
            .with_crash(CrashSpec::during(1, Kind::First, &[2]))
            .with_scheduler(SchedulerSpec::Random { seed: 3, fairness_bound: 64 });
        run_scenario(&cfg).unwrap()
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let t = sample();
        let text = t.to_jsonl();
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
        assert_eq!(text.lines().count(), t.events.len() + 2);
        assert!(text.lines().next().unwrap().contains("\"format\":\"veclab-trace/1\""));
        assert!(t.events.iter().any(|e| matches!(e, Event::Crash { auto: true, .. })));
        assert_eq!(t.verdict.config_hash.len(), 16);
    }

    #[test]
    fn malformed_traces_report_the_line() {
        let text = sample().to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "{\"type\":\"event\",\"i\":7,\"event\":\"crash\",\"victim\":1}";
        match Trace::from_jsonl(&lines.join("\n")) {
            Err(SimError::TraceFormat { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let no_verdict: Vec<&str> = text.lines().take(3).collect();
        assert!(Trace::from_jsonl(&no_verdict.join("\n")).is_err());
        assert!(Trace::from_jsonl("{\"type\":\"event\",\"i\":0}").is_err());
        assert!(Trace::from_jsonl("not json").is_err());
    }
}
