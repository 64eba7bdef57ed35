use super::config::ScenarioConfig;
use super::network::{Configuration, Event};
use super::scheduler::{build_scheduler, Scheduler};
use super::trace::{ProcessOutcome, RunVerdict, StopReason, Trace};
use super::SimError;
use crate::canonical::hash_hex;
use crate::value::ProcessId;

/// Why the run is over, or `None` if it may continue.
fn halted(config: &Configuration, max_events: u64) -> Option<StopReason> {
    if config.all_live_decided() {
        Some(StopReason::Halted)
    } else if config.event_count() >= max_events {
        Some(StopReason::EventBound)
    } else if config.enabled_events().is_empty() {
        Some(StopReason::Quiescent)
    } else {
        None
    }
}

/// Stop reason of a final configuration.
pub fn stop_reason(config: &Configuration, max_events: u64) -> StopReason {
    halted(config, max_events).unwrap_or(StopReason::SchedulerExhausted)
}

pub(crate) fn verdict_of(config: &Configuration, max_events: u64) -> RunVerdict {
    let outcomes = config
        .states()
        .iter()
        .map(|s| match (config.is_live(s.id()), s.decided()) {
            (false, d) => ProcessOutcome::Crashed { decided: d.cloned() },
            (true, Some(v)) => ProcessOutcome::Decided { vector: v.clone() },
            (true, None) => ProcessOutcome::NotDecided,
        })
        .collect();
    RunVerdict {
        outcomes,
        stop: stop_reason(config, max_events),
        event_count: config.event_count(),
        config_hash: hash_hex(config.canonical_hash()),
        undelivered: config.undelivered(),
    }
}

fn auto_crash(victim: ProcessId) -> Event {
    Event::Crash { victim, auto: true }
}

/// Run to completion, returning the trace and the final configuration.
pub fn run(scenario: &ScenarioConfig, scheduler: &mut dyn Scheduler) -> Result<(Trace, Configuration), SimError> {
    let mut config = Configuration::new(scenario)?;
    let mut events = Vec::new();
    if let Some(v) = config.start()? {
        events.push(auto_crash(v));
    }
    let max = scenario.bounds.max_events;
    loop {
        if config.all_live_decided() || config.event_count() >= max {
            break;
        }
        let enabled = config.enabled_events();
        if enabled.is_empty() {
            break;
        }
        let Some(ev) = scheduler.next(&config, &enabled)? else { break };
        if let Some(v) = config.apply(&ev)? {
            events.push(ev);
            events.push(auto_crash(v));
        } else {
            events.push(ev);
        }
    }
    let verdict = verdict_of(&config, max);
    Ok((Trace { scenario: scenario.clone(), events, verdict }, config))
}

pub fn run_with(scenario: &ScenarioConfig, scheduler: &mut dyn Scheduler) -> Result<Trace, SimError> {
    run(scenario, scheduler).map(|(t, _)| t)
}

/// Run with the scheduler the scenario describes.
pub fn run_scenario(scenario: &ScenarioConfig) -> Result<Trace, SimError> {
    let mut s = build_scheduler(&scenario.scheduler);
    run_with(scenario, s.as_mut())
}

/// Re-execute a trace event by event and check the verdict matches exactly.
pub fn replay(trace: &Trace) -> Result<Configuration, SimError> {
    let mut config = Configuration::new(&trace.scenario)?;
    let mut fired = config.start()?;
    for (i, ev) in trace.events.iter().enumerate() {
        if let Event::Crash { victim, auto: true } = ev {
            if fired.take() != Some(*victim) {
                return Err(SimError::ReplayMismatch(format!("event {i}: automatic crash of {victim} did not recur")));
            }
            continue;
        }
        if let Some(v) = fired.take() {
            return Err(SimError::ReplayMismatch(format!("event {i}: unrecorded crash of {v}")));
        }
        fired = config.apply(ev).map_err(|e| SimError::ReplayMismatch(format!("event {i}: {e}")))?;
    }
    if let Some(v) = fired {
        return Err(SimError::ReplayMismatch(format!("unrecorded crash of {v} at end")));
    }
    let verdict = verdict_of(&config, trace.scenario.bounds.max_events);
    if verdict != trace.verdict {
        return Err(SimError::ReplayMismatch(format!(
            "verdict differs: recorded {:?}, replayed {:?}",
            trace.verdict, verdict
        )));
    }
    Ok(config)
}

/// Apply the events that are enabled when their turn comes and skip the
/// rest. Produces a well-formed trace of what actually happened.
pub fn replay_lenient(scenario: &ScenarioConfig, events: &[Event]) -> Result<(Trace, Configuration), SimError> {
    let mut config = Configuration::new(scenario)?;
    let mut applied = Vec::new();
    if let Some(v) = config.start()? {
        applied.push(auto_crash(v));
    }
    let max = scenario.bounds.max_events;
    for ev in events {
        if matches!(ev, Event::Crash { auto: true, .. }) || !config.is_enabled(ev) {
            continue;
        }
        if config.event_count() >= max || config.all_live_decided() {
            break;
        }
        let fired = config.apply(ev)?;
        applied.push(*ev);
        if let Some(v) = fired {
            applied.push(auto_crash(v));
        }
    }
    let verdict = verdict_of(&config, max);
    Ok((Trace { scenario: scenario.clone(), events: applied, verdict }, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Kind;
    use crate::sim::{CrashSpec, SchedulerSpec, ScriptStep};

    #[test]
    fn fifo_run_without_crash_halts_with_agreement() {
        let t = run_scenario(&ScenarioConfig::new(5)).unwrap();
        assert_eq!(t.verdict.stop, StopReason::Halted);
        let decided: Vec<_> = t.verdict.outcomes.iter().map(|o| o.decided().cloned().unwrap()).collect();
        assert!(decided.windows(2).all(|w| w[0] == w[1]));
        replay(&t).unwrap();
    }

    #[test]
    fn replay_detects_tampering() {
        let cfg = ScenarioConfig::new(5)
            .with_crash(CrashSpec::before(0, Kind::Second))
            .with_scheduler(SchedulerSpec::Random { seed: 11, fairness_bound: 64 });
        let t = run_scenario(&cfg).unwrap();
        replay(&t).unwrap();

        let mut bad = t.clone();
        bad.verdict.config_hash = "0000000000000000".into();
        assert!(matches!(replay(&bad), Err(SimError::ReplayMismatch(_))));

        let mut swapped = t.clone();
        let n = swapped.events.len();
        swapped.events.swap(0, n - 1);
        assert!(replay(&swapped).is_err());
    }

    #[test]
    fn auto_crash_is_recorded_and_checked() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::after(4, Kind::Initial));
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.events[0], Event::Crash { victim: ProcessId(4), auto: true });
        assert!(matches!(t.verdict.outcomes[4], ProcessOutcome::Crashed { .. }));
        let mut missing = t.clone();
        missing.events.remove(0);
        assert!(replay(&missing).is_err());
    }

    #[test]
    fn event_bound_stops_the_run() {
        let mut cfg = ScenarioConfig::new(5);
        cfg.bounds.max_events = 7;
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.verdict.stop, StopReason::EventBound);
        assert_eq!(t.verdict.event_count, 7);
        replay(&t).unwrap();
    }

    #[test]
    fn lenient_replay_skips_disabled_events() {
        let cfg = ScenarioConfig::new(5)
            .with_scheduler(SchedulerSpec::Scripted { script: vec![ScriptStep::deliver(0, 1, Kind::Initial)] });
        let t = run_scenario(&cfg).unwrap();
        let mut events = t.events.clone();
        events.insert(0, Event::Deliver { from: ProcessId(0), to: ProcessId(1), seq: 5, kind: Kind::Seed });
        events.push(t.events[0]);
        let (lt, _) = replay_lenient(&cfg, &events).unwrap();
        assert_eq!(lt.events, t.events);
        assert_eq!(lt.verdict, t.verdict);
    }
}
