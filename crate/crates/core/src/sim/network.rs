use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::config::{CrashPoint, CrashSpec, ScenarioConfig};
use super::SimError;
use crate::canonical::{hash_bytes, put_u64, Canonical};
use crate::protocol::{Effects, Kind, Message, ProcessState};
use crate::value::ProcessId;

/// Identifies one buffered point-to-point message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntryKey {
    pub from: ProcessId,
    pub to: ProcessId,
    pub seq: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Deliver {
        from: ProcessId,
        to: ProcessId,
        seq: u32,
        kind: Kind,
    },
    /// A receive that returns nothing although messages are pending.
    ReceiveEmpty {
        process: ProcessId,
    },
    /// `auto` marks crashes fired by the crash point itself rather than
    /// chosen by the scheduler; replay skips them and checks they recur.
    Crash {
        victim: ProcessId,
        #[serde(default)]
        auto: bool,
    },
}

impl Event {
    pub fn key(&self) -> Option<EntryKey> {
        match *self {
            Event::Deliver { from, to, seq, .. } => Some(EntryKey { from, to, seq }),
            _ => None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Deliver { from, to, seq, kind } => write!(f, "deliver {kind}#{seq} {from}->{to}"),
            Event::ReceiveEmpty { process } => write!(f, "receive-empty {process}"),
            Event::Crash { victim, auto } => {
                write!(f, "crash {victim}{}", if *auto { " (auto)" } else { "" })
            }
        }
    }
}

/// A sent, undelivered message. `send_index` is a global send counter and
/// `sent_at` the event count when it was sent, used for fairness ages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferEntry {
    pub message: Message,
    pub send_index: u64,
    pub sent_at: u64,
}

impl BufferEntry {
    pub fn key(&self) -> EntryKey {
        EntryKey { from: self.message.sender, to: self.message.destination, seq: self.message.seq }
    }

    pub fn event(&self) -> Event {
        Event::Deliver {
            from: self.message.sender,
            to: self.message.destination,
            seq: self.message.seq,
            kind: self.message.kind.kind(),
        }
    }
}

fn state_key(s: &ProcessState) -> u64 {
    let mut out = Vec::with_capacity(1024);
    s.encode(&mut out);
    xxh3_64(&out)
}

/// Process states plus message buffer: one global configuration.
#[derive(Clone, Debug)]
pub struct Configuration {
    /// Shared until written; a step only touches the receiving process.
    states: Vec<Arc<ProcessState>>,
    /// Per-process hash of the canonical encoding; `None` once stale.
    state_keys: Vec<Option<u64>>,
    /// In send order.
    buffer: Vec<BufferEntry>,
    crash: Option<Arc<CrashSpec>>,
    crashed: Option<ProcessId>,
    event_count: u64,
    next_send_index: u64,
    empty_limit: u32,
    empty_used: Vec<u32>,
}

impl Configuration {
    /// Fresh processes, nothing started. Call [`Configuration::start`] next.
    pub fn new(config: &ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let states = config
            .initial_values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                ProcessState::with_rules(ProcessId(i), config.n, v.clone(), config.rules)
                    .map(Arc::new)
                    .map_err(|source| SimError::Protocol { process: ProcessId(i), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let state_keys = vec![None; states.len()];
        Ok(Configuration {
            states,
            state_keys,
            buffer: Vec::new(),
            crash: config.crash.clone().map(Arc::new),
            crashed: None,
            event_count: 0,
            next_send_index: 0,
            empty_limit: config.receive_empty_limit,
            empty_used: vec![0; config.n],
        })
    }

    /// Every process broadcasts its initial value, in index order. Returns the
    /// victim if the crash point fired.
    pub fn start(&mut self) -> Result<Option<ProcessId>, SimError> {
        let mut fired = None;
        for i in 0..self.states.len() {
            let p = ProcessId(i);
            let fx = Arc::make_mut(&mut self.states[i])
                .start()
                .map_err(|source| SimError::Protocol { process: p, source })?;
            self.state_keys[i] = None;
            if let Some(v) = self.emit(p, fx) {
                fired = Some(v);
            }
        }
        Ok(fired)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Arc<ProcessState>] {
        &self.states
    }

    pub fn state(&self, p: ProcessId) -> &ProcessState {
        &self.states[p.0]
    }

    pub fn buffer(&self) -> &[BufferEntry] {
        &self.buffer
    }

    pub fn crash_spec(&self) -> Option<&CrashSpec> {
        self.crash.as_deref()
    }

    pub fn crashed(&self) -> Option<ProcessId> {
        self.crashed
    }

    pub fn crash_pending(&self) -> bool {
        self.crash.is_some() && self.crashed.is_none()
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn is_live(&self, p: ProcessId) -> bool {
        self.crashed != Some(p)
    }

    pub fn live(&self) -> impl Iterator<Item = &ProcessState> {
        self.states.iter().map(|s| &**s).filter(|s| self.is_live(s.id()))
    }

    pub fn all_live_decided(&self) -> bool {
        self.live().all(|s| s.decided().is_some())
    }

    pub fn entry(&self, key: EntryKey) -> Option<&BufferEntry> {
        self.buffer.iter().find(|e| e.key() == key)
    }

    fn has_pending_to(&self, p: ProcessId) -> bool {
        self.buffer.iter().any(|e| e.message.destination == p)
    }

    /// Deliveries in send order, then empty receives, then the crash.
    pub fn enabled_events(&self) -> Vec<Event> {
        let mut out: Vec<Event> =
            self.buffer.iter().filter(|e| self.is_live(e.message.destination)).map(BufferEntry::event).collect();
        if self.empty_limit > 0 {
            for i in 0..self.n() {
                let p = ProcessId(i);
                if self.is_live(p) && self.empty_used[i] < self.empty_limit && self.has_pending_to(p) {
                    out.push(Event::ReceiveEmpty { process: p });
                }
            }
        }
        if let Some(victim) = self.schedulable_crash() {
            out.push(Event::Crash { victim, auto: false });
        }
        out
    }

    /// A Before crash may be taken at any time until its broadcast fires it.
    fn schedulable_crash(&self) -> Option<ProcessId> {
        match self.crash.as_deref() {
            Some(CrashSpec { victim, point: CrashPoint::Before(_) }) if self.crashed.is_none() => Some(*victim),
            _ => None,
        }
    }

    pub fn is_enabled(&self, event: &Event) -> bool {
        match *event {
            Event::Deliver { from, to, seq, kind } => {
                self.is_live(to)
                    && self.entry(EntryKey { from, to, seq }).is_some_and(|e| e.message.kind.kind() == kind)
            }
            Event::ReceiveEmpty { process } => {
                self.empty_limit > 0
                    && self.is_live(process)
                    && self.empty_used[process.0] < self.empty_limit
                    && self.has_pending_to(process)
            }
            Event::Crash { victim, auto: false } => self.schedulable_crash() == Some(victim),
            Event::Crash { auto: true, .. } => false,
        }
    }

    /// Apply one enabled event. Returns the victim if a crash point fired
    /// as a consequence.
    pub fn apply(&mut self, event: &Event) -> Result<Option<ProcessId>, SimError> {
        if !self.is_enabled(event) {
            return Err(SimError::NotEnabled(*event));
        }
        self.event_count += 1;
        match *event {
            Event::Deliver { from, to, seq, .. } => {
                let key = EntryKey { from, to, seq };
                let idx = self.buffer.iter().position(|e| e.key() == key).expect("enabled");
                let entry = self.buffer.remove(idx);
                let fx = Arc::make_mut(&mut self.states[to.0])
                    .receive(entry.message)
                    .map_err(|source| SimError::Protocol { process: to, source })?;
                self.state_keys[to.0] = None;
                Ok(self.emit(to, fx))
            }
            Event::ReceiveEmpty { process } => {
                self.empty_used[process.0] += 1;
                Ok(None)
            }
            Event::Crash { victim, .. } => {
                self.crashed = Some(victim);
                Ok(None)
            }
        }
    }

    fn emit(&mut self, sender: ProcessId, fx: Effects) -> Option<ProcessId> {
        let n = self.n();
        for b in fx.outbound {
            let point = match self.crash.as_deref() {
                Some(spec) if spec.victim == sender && self.crashed.is_none() => Some(&spec.point),
                _ => None,
            };
            if let Some(point) = point.filter(|p| p.kind() == b.kind.kind()) {
                let allowed: Option<Vec<ProcessId>> = match point {
                    CrashPoint::Before(_) => Some(vec![]),
                    CrashPoint::During(_, to) => Some(to.clone()),
                    CrashPoint::After(_) => None,
                };
                for m in b.messages(sender, n) {
                    if allowed.as_ref().is_none_or(|a| a.contains(&m.destination)) {
                        self.push(m);
                    }
                }
                self.crashed = Some(sender);
                return Some(sender);
            }
            for m in b.messages(sender, n) {
                self.push(m);
            }
        }
        None
    }

    fn push(&mut self, message: Message) {
        self.buffer.push(BufferEntry { message, send_index: self.next_send_index, sent_at: self.event_count });
        self.next_send_index += 1;
    }

    /// Undelivered messages, sorted by key.
    pub fn undelivered(&self) -> Vec<EntryKey> {
        let mut keys: Vec<EntryKey> = self.buffer.iter().map(BufferEntry::key).collect();
        keys.sort();
        keys
    }

    /// FNV-1a over process states, the buffer sorted by (sender, seq,
    /// destination), and crash status. Event counters and send indices are
    /// excluded, so schedules that reach the same configuration collide.
    pub fn canonical_hash(&self) -> u64 {
        let mut out = Vec::with_capacity(4096);
        self.encode(&mut out);
        hash_bytes(&out)
    }

    /// Same encoding as [`Configuration::canonical_hash`] under a faster
    /// hash; used for the explorer's visited set.
    /// Distinguishes the same configurations as [`Configuration::canonical_hash`]
    /// up to hash collisions, using cached per-process hashes and a faster
    /// hash function. Used for the explorer's visited set.
    pub fn dedupe_key(&mut self, scratch: &mut Vec<u8>) -> u64 {
        scratch.clear();
        for (k, s) in self.state_keys.iter_mut().zip(&self.states) {
            put_u64(scratch, *k.get_or_insert_with(|| state_key(s)));
        }
        self.encode_rest(scratch);
        xxh3_64(scratch)
    }

    fn encode_rest(&self, out: &mut Vec<u8>) {
        let mut entries: Vec<&BufferEntry> = self.buffer.iter().collect();
        entries.sort_by_key(|e| (e.message.sender, e.message.seq, e.message.destination));
        put_u64(out, entries.len() as u64);
        for e in entries {
            e.message.encode(out);
        }
        self.crashed.encode(out);
        for &u in &self.empty_used {
            put_u64(out, u64::from(u));
        }
    }
}

impl Canonical for Configuration {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.states.len() as u64);
        for s in &self.states {
            s.encode(out);
        }
        self.encode_rest(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Phase;
    use crate::sim::ScenarioConfig;

    fn started(cfg: &ScenarioConfig) -> Configuration {
        let mut c = Configuration::new(cfg).unwrap();
        c.start().unwrap();
        c
    }

    fn deliver(c: &mut Configuration, from: usize, to: usize, kind: Kind) {
        let ev = c
            .enabled_events()
            .into_iter()
            .find(|e| matches!(e, Event::Deliver { from: f, to: t, kind: k, .. } if f.0 == from && t.0 == to && *k == kind))
            .unwrap_or_else(|| panic!("no {kind} {from}->{to}"));
        c.apply(&ev).unwrap();
    }

    #[test]
    fn start_fills_buffer_in_send_order() {
        let c = started(&ScenarioConfig::new(5));
        assert_eq!(c.buffer().len(), 20);
        let idx: Vec<u64> = c.buffer().iter().map(|e| e.send_index).collect();
        assert_eq!(idx, (0..20).collect::<Vec<_>>());
        assert!(c.buffer().iter().all(|e| e.message.seq == 0));
        assert_eq!(c.enabled_events().len(), 20);
    }

    #[test]
    fn delivery_applies_transition_and_enqueues_broadcasts() {
        let mut c = started(&ScenarioConfig::new(5));
        deliver(&mut c, 1, 0, Kind::Initial);
        deliver(&mut c, 2, 0, Kind::Initial);
        assert_eq!(c.buffer().len(), 18);
        deliver(&mut c, 3, 0, Kind::Initial);
        assert_eq!(c.state(ProcessId(0)).phase(), Phase::Proposals);
        // three consumed, four first proposals added
        assert_eq!(c.buffer().len(), 21);
        assert_eq!(c.event_count(), 3);
        let firsts: Vec<_> = c.buffer().iter().filter(|e| e.message.kind.kind() == Kind::First).collect();
        assert_eq!(firsts.len(), 4);
        assert!(firsts.iter().all(|e| e.message.seq == 1 && e.sent_at == 3));
    }

    #[test]
    fn not_enabled_event_is_rejected() {
        let mut c = started(&ScenarioConfig::new(5));
        let ev = Event::Deliver { from: ProcessId(0), to: ProcessId(1), seq: 1, kind: Kind::First };
        assert_eq!(c.apply(&ev), Err(SimError::NotEnabled(ev)));
        let bad_kind = Event::Deliver { from: ProcessId(0), to: ProcessId(1), seq: 0, kind: Kind::Seed };
        assert!(c.apply(&bad_kind).is_err());
        let auto = Event::Crash { victim: ProcessId(0), auto: true };
        assert!(c.apply(&auto).is_err());
    }

    #[test]
    fn before_initial_crash_sends_nothing() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::before(4, Kind::Initial));
        let mut c = Configuration::new(&cfg).unwrap();
        assert_eq!(c.start().unwrap(), Some(ProcessId(4)));
        assert_eq!(c.buffer().len(), 16);
        assert!(c.buffer().iter().all(|e| e.message.sender != ProcessId(4)));
        // messages to the victim are not enabled
        assert_eq!(c.enabled_events().len(), 12);
    }

    #[test]
    fn during_crash_reaches_only_listed_destinations() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::during(4, Kind::Initial, &[0, 2]));
        let c = started(&cfg);
        let dests: Vec<usize> =
            c.buffer().iter().filter(|e| e.message.sender == ProcessId(4)).map(|e| e.message.destination.0).collect();
        assert_eq!(dests, vec![0, 2]);
        assert_eq!(c.crashed(), Some(ProcessId(4)));
    }

    #[test]
    fn after_crash_sends_full_broadcast_then_stops() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::after(0, Kind::First));
        let mut c = started(&cfg);
        for s in 1..4 {
            deliver(&mut c, s, 0, Kind::Initial);
        }
        assert_eq!(c.crashed(), Some(ProcessId(0)));
        let firsts = c.buffer().iter().filter(|e| e.message.sender == ProcessId(0) && e.message.seq == 1).count();
        assert_eq!(firsts, 4);
    }

    #[test]
    fn pending_before_crash_is_a_schedulable_event() {
        let cfg = ScenarioConfig::new(5).with_crash(CrashSpec::before(2, Kind::Seed));
        let mut c = started(&cfg);
        let crash = Event::Crash { victim: ProcessId(2), auto: false };
        assert_eq!(c.enabled_events().last(), Some(&crash));
        c.apply(&crash).unwrap();
        assert_eq!(c.crashed(), Some(ProcessId(2)));
        assert!(!c.enabled_events().iter().any(|e| matches!(e, Event::Crash { .. })));
        assert!(!c.enabled_events().iter().any(|e| e.key().is_some_and(|k| k.to == ProcessId(2))));
    }

    #[test]
    fn receive_empty_is_bounded_per_process() {
        let mut cfg = ScenarioConfig::new(5);
        cfg.receive_empty_limit = 1;
        let mut c = started(&cfg);
        let ev = Event::ReceiveEmpty { process: ProcessId(3) };
        assert!(c.enabled_events().contains(&ev));
        let before = c.state(ProcessId(3)).clone();
        c.apply(&ev).unwrap();
        assert_eq!(c.state(ProcessId(3)), &before);
        assert!(!c.enabled_events().contains(&ev));
    }

    #[test]
    fn hash_ignores_send_order_across_senders() {
        let cfg = ScenarioConfig::new(5);
        let mut a = started(&cfg);
        let mut b = started(&cfg);
        deliver(&mut a, 1, 0, Kind::Initial);
        deliver(&mut a, 2, 3, Kind::Initial);
        deliver(&mut b, 2, 3, Kind::Initial);
        deliver(&mut b, 1, 0, Kind::Initial);
        assert_eq!(a.canonical_hash(), b.canonical_hash());
        deliver(&mut b, 2, 0, Kind::Initial);
        assert_ne!(a.canonical_hash(), b.canonical_hash());
    }
}
