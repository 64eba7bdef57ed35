use super::properties::{evaluate, Property};
use crate::sim::{replay_lenient, Event, ScenarioConfig, SimError, Trace};

fn failing(scenario: &ScenarioConfig, events: &[Event], property: Property) -> Result<Option<Trace>, SimError> {
    let (trace, config) = replay_lenient(scenario, events)?;
    let report = evaluate(&config, Some(trace.verdict.stop));
    Ok(report.status(property).is_fail().then_some(trace))
}

fn order_key(e: &Event) -> (usize, usize, u32) {
    match *e {
        Event::Deliver { from, to, seq, .. } => (from.0, to.0, seq),
        Event::ReceiveEmpty { process } => (process.0, usize::MAX, 0),
        Event::Crash { victim, .. } => (victim.0, usize::MAX, u32::MAX),
    }
}

/// Shrink a failing trace: drop chunks of events (events that become
/// disabled are skipped on replay), then sort adjacent events by sender
/// where the failure survives. The result fails the same property and is
/// never longer than the input.
pub fn minimize(trace: &Trace, property: Property) -> Result<Trace, SimError> {
    let scenario = &trace.scenario;
    let mut events: Vec<Event> = trace.scheduled_events().copied().collect();
    let Some(mut best) = failing(scenario, &events, property)? else {
        return Err(SimError::ReplayMismatch(format!("trace does not fail {property}")));
    };

    let mut chunk = events.len() / 2;
    while chunk >= 1 {
        let mut i = 0;
        while i < events.len() {
            let end = (i + chunk).min(events.len());
            let candidate: Vec<Event> = events[..i].iter().chain(&events[end..]).copied().collect();
            match failing(scenario, &candidate, property)? {
                Some(t) => {
                    events = candidate;
                    best = t;
                }
                None => i += chunk,
            }
        }
        chunk /= 2;
    }

    for i in 0..events.len().saturating_sub(1) {
        if order_key(&events[i + 1]) < order_key(&events[i]) {
            events.swap(i, i + 1);
            match failing(scenario, &events, property)? {
                Some(t) => best = t,
                None => events.swap(i, i + 1),
            }
        }
    }
    debug_assert!(best.events.len() <= trace.events.len());
    Ok(best)
}
