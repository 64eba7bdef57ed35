use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{SchedulerSpec, ScriptStep};
use super::network::{Configuration, Event};
use super::SimError;

/// Picks the next event from the enabled set. `Ok(None)` ends the run.
pub trait Scheduler: Send {
    fn next(&mut self, config: &Configuration, enabled: &[Event]) -> Result<Option<Event>, SimError>;
}

pub fn build_scheduler(spec: &SchedulerSpec) -> Box<dyn Scheduler> {
    match spec {
        SchedulerSpec::Fifo => Box::new(Fifo),
        SchedulerSpec::Random { seed, fairness_bound } => Box::new(SeededRandom::new(*seed, *fairness_bound)),
        SchedulerSpec::Lifo { starve, fairness_bound } => {
            Box::new(AdversarialLifo::new(starve.map(crate::ProcessId), *fairness_bound))
        }
        SchedulerSpec::Scripted { script } => Box::new(Scripted::new(script.clone())),
    }
}

/// The oldest deliverable entry, if it has waited at least `bound` events.
fn overdue(config: &Configuration, bound: u64) -> Option<Event> {
    let oldest = config.buffer().iter().find(|e| config.is_live(e.message.destination))?;
    (config.event_count() - oldest.sent_at >= bound).then(|| oldest.event())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Fifo;

impl Scheduler for Fifo {
    fn next(&mut self, _: &Configuration, enabled: &[Event]) -> Result<Option<Event>, SimError> {
        Ok(enabled.first().copied())
    }
}

/// Uniform over the enabled set from a ChaCha8 stream; an entry that has
/// waited `fairness_bound` events is delivered first.
#[derive(Clone, Debug)]
pub struct SeededRandom {
    rng: ChaCha8Rng,
    fairness_bound: u64,
}

impl SeededRandom {
    pub fn new(seed: u64, fairness_bound: u64) -> Self {
        SeededRandom { rng: ChaCha8Rng::seed_from_u64(seed), fairness_bound: fairness_bound.max(1) }
    }
}

impl Scheduler for SeededRandom {
    fn next(&mut self, config: &Configuration, enabled: &[Event]) -> Result<Option<Event>, SimError> {
        if enabled.is_empty() {
            return Ok(None);
        }
        if let Some(ev) = overdue(config, self.fairness_bound) {
            return Ok(Some(ev));
        }
        Ok(Some(enabled[self.rng.gen_range(0..enabled.len())]))
    }
}

/// Newest delivery first, holding back one sender's messages until the
/// fairness bound forces them out.
#[derive(Clone, Debug)]
pub struct AdversarialLifo {
    starve: Option<crate::ProcessId>,
    fairness_bound: u64,
}

impl AdversarialLifo {
    pub fn new(starve: Option<crate::ProcessId>, fairness_bound: u64) -> Self {
        AdversarialLifo { starve, fairness_bound: fairness_bound.max(1) }
    }
}

impl Scheduler for AdversarialLifo {
    fn next(&mut self, config: &Configuration, enabled: &[Event]) -> Result<Option<Event>, SimError> {
        if let Some(ev) = overdue(config, self.fairness_bound) {
            return Ok(Some(ev));
        }
        let deliveries = || enabled.iter().rev().filter(|e| e.key().is_some());
        let pick = deliveries()
            .find(|e| e.key().is_some_and(|k| Some(k.from) != self.starve))
            .or_else(|| deliveries().next())
            .or_else(|| enabled.last());
        Ok(pick.copied())
    }
}

/// Follows a fixed list of steps. A step that cannot be taken is an error.
#[derive(Clone, Debug)]
pub struct Scripted {
    steps: Vec<ScriptStep>,
    cursor: usize,
}

impl Scripted {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        Scripted { steps, cursor: 0 }
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.steps.len()
    }
}

impl Scheduler for Scripted {
    fn next(&mut self, _: &Configuration, enabled: &[Event]) -> Result<Option<Event>, SimError> {
        while let Some(step) = self.steps.get(self.cursor) {
            match step {
                ScriptStep::Deliver { from, to, kind } => {
                    let found = enabled.iter().find(|e| {
                        matches!(e, Event::Deliver { from: f, to: t, kind: k, .. }
                            if f.0 == *from && t.0 == *to && k == kind)
                    });
                    let step = self.cursor;
                    self.cursor += 1;
                    return match found {
                        Some(ev) => Ok(Some(*ev)),
                        None => {
                            Err(SimError::Script { step, detail: format!("no enabled {kind} from p{from} to p{to}") })
                        }
                    };
                }
                ScriptStep::DeliverAll { filter } => {
                    let found = enabled.iter().find(
                        |e| matches!(e, Event::Deliver { from, to, kind, .. } if filter.matches(*from, *to, *kind)),
                    );
                    match found {
                        Some(ev) => return Ok(Some(*ev)),
                        None => self.cursor += 1,
                    }
                }
                ScriptStep::Crash => {
                    let step = self.cursor;
                    self.cursor += 1;
                    return match enabled.iter().find(|e| matches!(e, Event::Crash { .. })) {
                        Some(ev) => Ok(Some(*ev)),
                        None => Err(SimError::Script { step, detail: "crash not enabled".into() }),
                    };
                }
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Kind;
    use crate::sim::{run_with, ScenarioConfig, StopReason};
    use crate::ProcessId;

    #[test]
    fn random_is_reproducible_per_seed() {
        let cfg = ScenarioConfig::new(5);
        let a = run_with(&cfg, &mut SeededRandom::new(9, 64)).unwrap();
        let b = run_with(&cfg, &mut SeededRandom::new(9, 64)).unwrap();
        assert_eq!(a.events, b.events);
        let differs = (0..20u64).any(|s| run_with(&cfg, &mut SeededRandom::new(s, 64)).unwrap().events != a.events);
        assert!(differs);
    }

    #[test]
    fn fairness_bound_limits_waiting() {
        let cfg = ScenarioConfig::new(6);
        for seed in 0..20 {
            for bound in [1, 4, 16] {
                let mut c = crate::sim::Configuration::new(&cfg).unwrap();
                c.start().unwrap();
                let mut s = SeededRandom::new(seed, bound);
                loop {
                    let enabled = c.enabled_events();
                    let oldest = c.buffer().first().cloned();
                    let Some(ev) = s.next(&c, &enabled).unwrap() else { break };
                    // an overdue oldest entry always goes first
                    if let Some(o) = oldest {
                        if c.event_count() - o.sent_at >= bound {
                            assert_eq!(ev, o.event(), "seed {seed} bound {bound}");
                        }
                    }
                    c.apply(&ev).unwrap();
                }
                assert!(c.all_live_decided());
            }
        }
    }

    #[test]
    fn lifo_starves_victim_until_forced() {
        let cfg = ScenarioConfig::new(5);
        let mut c = crate::sim::Configuration::new(&cfg).unwrap();
        c.start().unwrap();
        let mut s = AdversarialLifo::new(Some(ProcessId(4)), 1000);
        let first = s.next(&c, &c.enabled_events()).unwrap().unwrap();
        assert_eq!(first.key().unwrap().from, ProcessId(3));
        let t = run_with(&cfg, &mut AdversarialLifo::new(Some(ProcessId(4)), 8)).unwrap();
        assert_eq!(t.verdict.stop, StopReason::Halted);
    }

    #[test]
    fn scripted_mismatch_is_an_error() {
        let cfg = ScenarioConfig::new(5);
        let mut s = Scripted::new(vec![ScriptStep::deliver(0, 1, Kind::Seed)]);
        let err = run_with(&cfg, &mut s).unwrap_err();
        assert!(matches!(err, SimError::Script { step: 0, .. }), "{err}");
        let mut s = Scripted::new(vec![ScriptStep::Crash]);
        assert!(run_with(&cfg, &mut s).is_err());
    }

    #[test]
    fn scripted_exhaustion_stops_the_run() {
        let cfg = ScenarioConfig::new(5);
        let mut s = Scripted::new(vec![ScriptStep::deliver(0, 1, Kind::Initial)]);
        let t = run_with(&cfg, &mut s).unwrap();
        assert_eq!(t.events.len(), 1);
        assert_eq!(t.verdict.stop, StopReason::SchedulerExhausted);
    }
}
