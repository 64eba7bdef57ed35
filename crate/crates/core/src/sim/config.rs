use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::protocol::{Kind, Rules};
use crate::value::{default_initial_values, InitialValue, ProcessId, MIN_PROCESSES};

/// Default number of picks an entry may wait before a fair scheduler must deliver it.
pub const DEFAULT_FAIRNESS_BOUND: u64 = 64;
pub const DEFAULT_MAX_EVENTS: u64 = 10_000;

/// Where the single crash happens, relative to one of the victim's broadcasts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CrashPoint {
    /// The victim stops before sending any copy of this broadcast.
    Before(Kind),
    /// Only the listed destinations receive this broadcast.
    During(Kind, Vec<ProcessId>),
    /// The broadcast is sent in full and the victim stops right after.
    After(Kind),
}

impl CrashPoint {
    pub fn kind(&self) -> Kind {
        match self {
            CrashPoint::Before(k) | CrashPoint::During(k, _) | CrashPoint::After(k) => *k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CrashRepr", into = "CrashRepr")]
pub struct CrashSpec {
    pub victim: ProcessId,
    pub point: CrashPoint,
}

impl CrashSpec {
    pub fn before(victim: usize, kind: Kind) -> Self {
        CrashSpec { victim: ProcessId(victim), point: CrashPoint::Before(kind) }
    }

    pub fn during(victim: usize, kind: Kind, delivered_to: &[usize]) -> Self {
        CrashSpec {
            victim: ProcessId(victim),
            point: CrashPoint::During(kind, delivered_to.iter().copied().map(ProcessId).collect()),
        }
    }

    pub fn after(victim: usize, kind: Kind) -> Self {
        CrashSpec { victim: ProcessId(victim), point: CrashPoint::After(kind) }
    }

    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.victim.0 >= n {
            return Err(SimError::config("crash.victim", format!("{} out of range for n={n}", self.victim.0)));
        }
        if let CrashPoint::During(_, to) = &self.point {
            if to.is_empty() {
                return Err(SimError::config("crash.delivered_to", "must be nonempty"));
            }
            if to.len() >= n - 1 {
                return Err(SimError::config("crash.delivered_to", "must be a proper subset of the other processes"));
            }
            for (i, d) in to.iter().enumerate() {
                if d.0 >= n || *d == self.victim {
                    return Err(SimError::config("crash.delivered_to", format!("invalid destination {}", d.0)));
                }
                if to[..i].contains(d) {
                    return Err(SimError::config("crash.delivered_to", format!("duplicate destination {}", d.0)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrashRepr {
    victim: usize,
    point: String,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    delivered_to: Vec<usize>,
}

impl TryFrom<CrashRepr> for CrashSpec {
    type Error = String;

    fn try_from(r: CrashRepr) -> Result<Self, String> {
        let point = match r.point.as_str() {
            "before" => CrashPoint::Before(r.kind),
            "during" => CrashPoint::During(r.kind, r.delivered_to.into_iter().map(ProcessId).collect()),
            "after" => CrashPoint::After(r.kind),
            other => return Err(format!("crash.point: expected before|during|after, got {other:?}")),
        };
        Ok(CrashSpec { victim: ProcessId(r.victim), point })
    }
}

impl From<CrashSpec> for CrashRepr {
    fn from(c: CrashSpec) -> Self {
        let (point, kind, delivered_to) = match c.point {
            CrashPoint::Before(k) => ("before", k, vec![]),
            CrashPoint::During(k, to) => ("during", k, to.into_iter().map(|p| p.0).collect()),
            CrashPoint::After(k) => ("after", k, vec![]),
        };
        CrashRepr { victim: c.victim.0, point: point.into(), kind, delivered_to }
    }
}

/// Selects buffered deliveries by sender, destination and kind; `None` matches all.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
}

impl Filter {
    pub fn any() -> Self {
        Filter::default()
    }

    pub fn kind(kind: Kind) -> Self {
        Filter { kind: Some(kind), ..Filter::default() }
    }

    pub fn matches(&self, from: ProcessId, to: ProcessId, kind: Kind) -> bool {
        self.from.as_ref().is_none_or(|f| f.contains(&from.0))
            && self.to.as_ref().is_none_or(|t| t.contains(&to.0))
            && self.kind.is_none_or(|k| k == kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptStep {
    /// Exactly one delivery; fails the run if it is not enabled.
    Deliver { from: usize, to: usize, kind: Kind },
    /// Deliver the oldest matching entry until none matches.
    DeliverAll {
        #[serde(flatten)]
        filter: Filter,
    },
    /// The scheduled crash; fails the run if it is not enabled.
    Crash,
}

impl ScriptStep {
    pub fn deliver(from: usize, to: usize, kind: Kind) -> Self {
        ScriptStep::Deliver { from, to, kind }
    }

    pub fn drain() -> Self {
        ScriptStep::DeliverAll { filter: Filter::any() }
    }

    pub fn deliver_all(kind: Kind) -> Self {
        ScriptStep::DeliverAll { filter: Filter::kind(kind) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerSpec {
    /// Oldest entry first.
    #[default]
    Fifo,
    /// Uniform choice from a seeded stream, with a fairness guard.
    Random {
        seed: u64,
        #[serde(default = "default_fairness")]
        fairness_bound: u64,
    },
    /// Newest entry first, starving one sender up to the fairness bound.
    Lifo {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        starve: Option<usize>,
        #[serde(default = "default_fairness")]
        fairness_bound: u64,
    },
    Scripted {
        script: Vec<ScriptStep>,
    },
}

fn default_fairness() -> u64 {
    DEFAULT_FAIRNESS_BOUND
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_events: DEFAULT_MAX_EVENTS }
    }
}

/// A complete description of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    #[serde(default)]
    pub initial_values: Vec<InitialValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash: Option<CrashSpec>,
    #[serde(default)]
    pub scheduler: SchedulerSpec,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub rules: Rules,
    /// How many times a receive may return nothing per process while messages
    /// are pending. Zero keeps these events out of the schedule space.
    #[serde(default)]
    pub receive_empty_limit: u32,
}

impl ScenarioConfig {
    /// `n` processes with default values, no crash, FIFO delivery.
    pub fn new(n: usize) -> Self {
        ScenarioConfig {
            n,
            initial_values: default_initial_values(n),
            crash: None,
            scheduler: SchedulerSpec::Fifo,
            bounds: Bounds::default(),
            rules: Rules::default(),
            receive_empty_limit: 0,
        }
    }

    pub fn with_crash(mut self, crash: CrashSpec) -> Self {
        self.crash = Some(crash);
        self
    }

    pub fn with_scheduler(mut self, scheduler: SchedulerSpec) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn with_rules(mut self, rules: Rules) -> Self {
        self.rules = rules;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < MIN_PROCESSES {
            return Err(SimError::config("n", format!("must be at least {MIN_PROCESSES}, got {}", self.n)));
        }
        if self.initial_values.len() != self.n {
            return Err(SimError::config(
                "initial_values",
                format!("expected {} entries, got {}", self.n, self.initial_values.len()),
            ));
        }
        if let Some(crash) = &self.crash {
            crash.validate(self.n)?;
        }
        match &self.scheduler {
            SchedulerSpec::Random { fairness_bound, .. } | SchedulerSpec::Lifo { fairness_bound, .. }
                if *fairness_bound == 0 =>
            {
                return Err(SimError::config("scheduler.fairness_bound", "must be at least 1"));
            }
            SchedulerSpec::Lifo { starve: Some(p), .. } if *p >= self.n => {
                return Err(SimError::config("scheduler.starve", format!("{p} out of range")));
            }
            _ => {}
        }
        if self.bounds.max_events == 0 {
            return Err(SimError::config("bounds.max_events", "must be at least 1"));
        }
        Ok(())
    }

    /// Parse TOML, or JSON when the text starts with `{`. Missing initial
    /// values default to `0x01..=n`.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg: ScenarioConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| SimError::config("scenario", e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| SimError::config("scenario", e.to_string()))?
        };
        if cfg.initial_values.is_empty() {
            cfg.initial_values = default_initial_values(cfg.n);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config("scenario", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_toml_scenario() {
        let cfg = ScenarioConfig::parse(
            r#"
n = 5
initial_values = ["0a", "0b", "0c", "0d", "0e"]

[crash]
victim = 4
point = "during"
kind = "first"
delivered_to = [1]

[scheduler]
type = "random"
seed = 7
fairness_bound = 32

[bounds]
max_events = 500
"#,
        )
        .unwrap();
        assert_eq!(cfg.n, 5);
        assert_eq!(cfg.initial_values[0], InitialValue::new([0x0a]));
        assert_eq!(cfg.crash, Some(CrashSpec::during(4, Kind::First, &[1])));
        assert_eq!(cfg.scheduler, SchedulerSpec::Random { seed: 7, fairness_bound: 32 });
        assert_eq!(cfg.bounds.max_events, 500);
        assert_eq!(cfg.rules, Rules::default());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::parse("n = 6").unwrap();
        assert_eq!(cfg.initial_values, default_initial_values(6));
        assert_eq!(cfg.scheduler, SchedulerSpec::Fifo);
        assert_eq!(cfg.bounds.max_events, DEFAULT_MAX_EVENTS);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::after(2, Kind::Seed)).with_scheduler(
            SchedulerSpec::Scripted { script: vec![ScriptStep::deliver(0, 1, Kind::Initial), ScriptStep::drain()] },
        );
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::parse(&json).unwrap(), cfg);
        assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ScenarioConfig::parse("n = 4").unwrap_err();
        assert!(err.to_string().contains("n:"), "{err}");
        let err = ScenarioConfig::parse("n = 5\ninitial_values = [\"01\"]").unwrap_err();
        assert!(err.to_string().contains("initial_values"), "{err}");
        let err = ScenarioConfig::parse("n = 5\n[crash]\nvictim = 9\npoint = \"before\"\nkind = \"seed\"").unwrap_err();
        assert!(err.to_string().contains("crash.victim"), "{err}");
        let err = ScenarioConfig::parse(
            "n = 5\n[crash]\nvictim = 0\npoint = \"during\"\nkind = \"seed\"\ndelivered_to = [1,2,3,4]",
        )
        .unwrap_err();
        assert!(err.to_string().contains("crash.delivered_to"), "{err}");
        let err = ScenarioConfig::parse("n = 5\nbogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ScenarioConfig::parse("initial_values = []").unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
    }
}
