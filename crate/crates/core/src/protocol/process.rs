use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::message::{Broadcast, Effects, Kind, Message, MessageKind};
use super::{DecisionRule, ProtocolError, Result, Rules};
use crate::canonical::{put_bool, put_u64, Canonical};
use crate::value::{InitialValue, ProcessId, VectorValue, MIN_PROCESSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Proposals,
    Decision,
    Decided,
}

/// Which rule ended the Proposals phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionRule {
    /// n-2 equal first proposals: completes with the vector missing one value.
    EqualFirstProposals,
    /// n-2 second proposals: completes with the full vector.
    SecondProposals,
}

/// State of one process.
///
/// Mutating methods take `&mut self`; cloning before a call gives the
/// functional `(state, message) -> (state', effects)` view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessState {
    id: ProcessId,
    n: usize,
    rules: Rules,
    phase: Phase,
    started: bool,
    input: InitialValue,
    output: Option<VectorValue>,
    known: Vec<Option<InitialValue>>,
    /// Per-sender bitmask of seqs already ingested.
    seen: Vec<u64>,
    reorder: Vec<BTreeMap<u32, Message>>,
    next_seq: Vec<u32>,
    /// Released messages whose phase has not started yet, in release order.
    deferred: Vec<Message>,
    send_seq: u32,
    first_sent: Option<VectorValue>,
    second_sent: Option<VectorValue>,
    first_from: Vec<Option<VectorValue>>,
    second_from: Vec<bool>,
    second_count: usize,
    second_value: Option<VectorValue>,
    completion: Option<VectorValue>,
    completed_via: Option<CompletionRule>,
    seeds: Vec<Option<VectorValue>>,
    seed_count: usize,
    updated: bool,
}

impl ProcessState {
    pub fn new(id: ProcessId, n: usize, input: InitialValue) -> Result<Self> {
        Self::with_rules(id, n, input, Rules::default())
    }

    pub fn with_rules(id: ProcessId, n: usize, input: InitialValue, rules: Rules) -> Result<Self> {
        if n < MIN_PROCESSES {
            return Err(ProtocolError::TooFewProcesses { n });
        }
        if id.0 >= n {
            return Err(ProtocolError::IdOutOfRange { id, n });
        }
        let mut known = vec![None; n];
        known[id.0] = Some(input.clone());
        Ok(ProcessState {
            id,
            n,
            rules,
            phase: Phase::Initial,
            started: false,
            input,
            output: None,
            known,
            seen: vec![0; n],
            reorder: vec![BTreeMap::new(); n],
            next_seq: vec![0; n],
            deferred: Vec::new(),
            send_seq: 0,
            first_sent: None,
            second_sent: None,
            first_from: vec![None; n],
            second_from: vec![false; n],
            second_count: 0,
            second_value: None,
            completion: None,
            completed_via: None,
            seeds: vec![None; n],
            seed_count: 0,
            updated: false,
        })
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rules(&self) -> Rules {
        self.rules
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn input(&self) -> &InitialValue {
        &self.input
    }

    /// The output register; set once on decision.
    pub fn output(&self) -> Option<&VectorValue> {
        self.output.as_ref()
    }

    pub fn decided(&self) -> Option<&VectorValue> {
        self.output.as_ref()
    }

    pub fn known_values(&self) -> &[Option<InitialValue>] {
        &self.known
    }

    pub fn next_seq(&self, sender: ProcessId) -> u32 {
        self.next_seq[sender.0]
    }

    pub fn first_proposal(&self) -> Option<&VectorValue> {
        self.first_sent.as_ref()
    }

    pub fn second_proposal(&self) -> Option<&VectorValue> {
        self.second_sent.as_ref()
    }

    pub fn second_count(&self) -> usize {
        self.second_count
    }

    /// The vector this process entered the Decision phase with.
    pub fn completion(&self) -> Option<&VectorValue> {
        self.completion.as_ref()
    }

    pub fn completed_via(&self) -> Option<CompletionRule> {
        self.completed_via
    }

    /// Decision seeds by sender slot; the own slot holds the completion vector.
    pub fn seeds(&self) -> &[Option<VectorValue>] {
        &self.seeds
    }

    /// True when the Update Rule replaced a null-slot vector by the full one.
    pub fn updated(&self) -> bool {
        self.updated
    }

    pub fn deferred_len(&self) -> usize {
        self.deferred.len()
    }

    /// Distinct first-proposal values received from others with their multiplicity,
    /// in order of first appearance by sender index.
    pub fn first_tally(&self) -> Vec<(VectorValue, usize)> {
        let mut tally: Vec<(VectorValue, usize)> = Vec::new();
        for v in self.first_from.iter().flatten() {
            match tally.iter_mut().find(|(t, _)| t == v) {
                Some((_, c)) => *c += 1,
                None => tally.push((v.clone(), 1)),
            }
        }
        tally
    }

    /// Emit the initial-value broadcast (seq 0).
    pub fn start(&mut self) -> Result<Effects> {
        if self.started {
            return Err(ProtocolError::AlreadyStarted(self.id));
        }
        self.started = true;
        let mut fx = Effects::default();
        self.broadcast(MessageKind::InitialValue(self.input.clone()), &mut fx);
        Ok(fx)
    }

    /// Order Rule: buffer `msg` and release everything from its sender that is
    /// now next in send order.
    pub fn ingest(&mut self, msg: Message) -> Result<Vec<Message>> {
        let s = msg.sender;
        if msg.destination != self.id {
            return Err(ProtocolError::WrongDestination { destination: msg.destination, at: self.id });
        }
        if s == self.id {
            return Err(ProtocolError::SelfDelivery(s));
        }
        if s.0 >= self.n {
            return Err(ProtocolError::IdOutOfRange { id: s, n: self.n });
        }
        if msg.seq >= 64 {
            return Err(ProtocolError::Malformed {
                sender: s,
                kind: msg.kind.kind(),
                reason: format!("seq {} out of range", msg.seq),
            });
        }
        let bit = 1u64 << msg.seq;
        if self.seen[s.0] & bit != 0 {
            return Err(ProtocolError::DuplicateSeq { sender: s, seq: msg.seq });
        }
        self.seen[s.0] |= bit;

        if !self.rules.order {
            return Ok(vec![msg]);
        }
        let queue = &mut self.reorder[s.0];
        queue.insert(msg.seq, msg);
        let mut released = Vec::new();
        while let Some(m) = queue.remove(&self.next_seq[s.0]) {
            self.next_seq[s.0] += 1;
            released.push(m);
        }
        Ok(released)
    }

    /// Process one message released by [`ingest`](Self::ingest).
    pub fn process(&mut self, msg: Message) -> Result<Effects> {
        let mut fx = Effects::default();
        self.dispatch(msg, &mut fx)?;
        Ok(fx)
    }

    /// `ingest` followed by `process` on every released message.
    pub fn receive(&mut self, msg: Message) -> Result<Effects> {
        let mut fx = Effects::default();
        for m in self.ingest(msg)? {
            self.dispatch(m, &mut fx)?;
        }
        Ok(fx)
    }

    pub fn handle_initial(&mut self, sender: ProcessId, value: InitialValue) -> Result<Effects> {
        let mut fx = Effects::default();
        self.on_initial(sender, value, &mut fx)?;
        Ok(fx)
    }

    pub fn handle_first(&mut self, sender: ProcessId, proposal: VectorValue) -> Result<Effects> {
        let mut fx = Effects::default();
        self.on_first(sender, proposal, &mut fx)?;
        Ok(fx)
    }

    pub fn handle_second(&mut self, sender: ProcessId, proposal: VectorValue) -> Result<Effects> {
        let mut fx = Effects::default();
        self.on_second(sender, proposal, &mut fx)?;
        Ok(fx)
    }

    pub fn handle_delta(&mut self, sender: ProcessId, seed: VectorValue) -> Result<Effects> {
        let mut fx = Effects::default();
        self.on_seed(sender, seed, &mut fx)?;
        Ok(fx)
    }

    /// Own value plus the n-2 received ones, null at the single unknown index.
    pub fn build_first_proposal(&self) -> Result<VectorValue> {
        let known = self.known.iter().filter(|v| v.is_some()).count();
        if known != self.n - 1 {
            return Err(ProtocolError::FirstProposalArity { known });
        }
        Ok(VectorValue::new(self.known.clone()))
    }

    fn dispatch(&mut self, msg: Message, fx: &mut Effects) -> Result<()> {
        if !self.ready_for(msg.kind.kind()) {
            self.deferred.push(msg);
            return Ok(());
        }
        let sender = msg.sender;
        match msg.kind {
            MessageKind::InitialValue(v) => self.on_initial(sender, v, fx),
            MessageKind::FirstProposal(p) => self.on_first(sender, p, fx),
            MessageKind::SecondProposal(p) => self.on_second(sender, p, fx),
            MessageKind::DecisionSeed(v) => self.on_seed(sender, v, fx),
        }
    }

    fn ready_for(&self, kind: Kind) -> bool {
        match kind {
            Kind::Initial => true,
            Kind::First | Kind::Second => self.phase >= Phase::Proposals,
            Kind::Seed => self.phase >= Phase::Decision,
        }
    }

    fn drain_deferred(&mut self, fx: &mut Effects) -> Result<()> {
        while let Some(i) = self.deferred.iter().position(|m| self.ready_for(m.kind.kind())) {
            let msg = self.deferred.remove(i);
            self.dispatch(msg, fx)?;
        }
        Ok(())
    }

    fn broadcast(&mut self, kind: MessageKind, fx: &mut Effects) {
        let seq = self.send_seq;
        self.send_seq += 1;
        fx.outbound.push(Broadcast { seq, kind });
    }

    fn check_sender(&self, sender: ProcessId) -> Result<()> {
        if sender.0 >= self.n {
            return Err(ProtocolError::IdOutOfRange { id: sender, n: self.n });
        }
        if sender == self.id {
            return Err(ProtocolError::SelfDelivery(sender));
        }
        Ok(())
    }

    fn malformed(&self, sender: ProcessId, kind: Kind, reason: impl Into<String>) -> ProtocolError {
        ProtocolError::Malformed { sender, kind, reason: reason.into() }
    }

    fn on_initial(&mut self, sender: ProcessId, value: InitialValue, fx: &mut Effects) -> Result<()> {
        self.check_sender(sender)?;
        if self.known[sender.0].is_some() {
            return Ok(());
        }
        self.known[sender.0] = Some(value);
        // Late values are kept for slot filling but never counted.
        if self.phase == Phase::Initial {
            let received = self.known.iter().filter(|v| v.is_some()).count() - 1;
            if received >= self.n - 2 {
                self.enter_proposals(fx)?;
            }
        }
        Ok(())
    }

    fn enter_proposals(&mut self, fx: &mut Effects) -> Result<()> {
        let first = self.build_first_proposal()?;
        self.first_sent = Some(first.clone());
        self.broadcast(MessageKind::FirstProposal(first), fx);
        self.phase = Phase::Proposals;
        self.drain_deferred(fx)
    }

    fn on_first(&mut self, sender: ProcessId, proposal: VectorValue, fx: &mut Effects) -> Result<()> {
        self.check_sender(sender)?;
        if proposal.len() != self.n || proposal.null_count() != 1 {
            return Err(self.malformed(sender, Kind::First, "needs n slots with exactly one null"));
        }
        if self.first_from[sender.0].is_some() {
            return Ok(());
        }
        self.first_from[sender.0] = Some(proposal.clone());

        let own_null = self.first_sent.as_ref().and_then(VectorValue::null_index);
        if self.rules.blend_first && self.second_sent.is_none() && proposal.null_index() != own_null {
            self.send_second(&proposal, fx)?;
        }

        if self.phase == Phase::Proposals {
            let quorum = self.first_tally().into_iter().find(|(_, count)| *count >= self.n - 2).map(|(v, _)| v);
            if let Some(v) = quorum {
                self.complete(v, CompletionRule::EqualFirstProposals, fx)?;
            }
        }
        Ok(())
    }

    fn on_second(&mut self, sender: ProcessId, proposal: VectorValue, fx: &mut Effects) -> Result<()> {
        self.check_sender(sender)?;
        if proposal.len() != self.n || !proposal.is_full() {
            return Err(self.malformed(sender, Kind::Second, "needs n slots and no null"));
        }
        if self.second_from[sender.0] {
            return Ok(());
        }
        let conflicts = |v: &Option<VectorValue>| v.as_ref().is_some_and(|v| *v != proposal);
        if conflicts(&self.second_value) || conflicts(&self.second_sent) {
            return Err(ProtocolError::ConflictingSecondProposal { sender });
        }
        self.second_from[sender.0] = true;
        self.second_count += 1;
        self.second_value.get_or_insert_with(|| proposal.clone());

        if self.rules.blend_second && self.second_sent.is_none() {
            self.send_second(&proposal, fx)?;
        }

        if self.phase == Phase::Proposals && self.second_count >= self.n - 2 {
            self.complete(proposal, CompletionRule::SecondProposals, fx)?;
        }
        Ok(())
    }

    /// Fill the null slot of the own first proposal from `source`, falling back
    /// to late-recorded initial values.
    fn send_second(&mut self, source: &VectorValue, fx: &mut Effects) -> Result<()> {
        let Some(own) = self.first_sent.clone() else {
            return Ok(());
        };
        let Some(slot) = own.null_index() else {
            return Ok(());
        };
        let value =
            source.get(slot).or(self.known[slot].as_ref()).cloned().ok_or(ProtocolError::MissingSlot { slot })?;
        let second = own.with_slot(slot, value);
        self.second_sent = Some(second.clone());
        self.broadcast(MessageKind::SecondProposal(second), fx);
        Ok(())
    }

    fn complete(&mut self, v: VectorValue, rule: CompletionRule, fx: &mut Effects) -> Result<()> {
        self.completion = Some(v.clone());
        self.completed_via = Some(rule);
        self.phase = Phase::Decision;
        self.seeds[self.id.0] = Some(v.clone());
        self.broadcast(MessageKind::DecisionSeed(v), fx);
        self.drain_deferred(fx)?;
        self.try_decide();
        Ok(())
    }

    fn on_seed(&mut self, sender: ProcessId, seed: VectorValue, _fx: &mut Effects) -> Result<()> {
        self.check_sender(sender)?;
        if seed.len() != self.n || seed.null_count() > 1 {
            return Err(self.malformed(sender, Kind::Seed, "needs n slots with at most one null"));
        }
        if self.seeds[sender.0].is_some() {
            return Ok(());
        }
        self.seeds[sender.0] = Some(seed);
        // Seeds recorded after the decision are ignored.
        if self.phase == Phase::Decision {
            self.seed_count += 1;
            self.try_decide();
        }
        Ok(())
    }

    fn received_full_seed(&self) -> Option<VectorValue> {
        self.seeds
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.id.0)
            .filter_map(|(_, s)| s.as_ref())
            .find(|s| s.is_full())
            .cloned()
    }

    fn try_decide(&mut self) {
        if self.phase != Phase::Decision {
            return;
        }
        let Some(mut value) = self.completion.clone() else {
            return;
        };
        let upgrade = |me: &Self, value: &mut VectorValue| -> bool {
            if me.rules.update && !value.is_full() {
                if let Some(full) = me.received_full_seed() {
                    *value = full;
                    return true;
                }
            }
            false
        };
        match self.rules.decision {
            DecisionRule::SeedThreshold => {
                if self.seed_count < self.n - 2 {
                    return;
                }
                self.updated = upgrade(self, &mut value);
            }
            DecisionRule::EqualDecisions => {
                let updated = upgrade(self, &mut value);
                let equal = 1 + self
                    .seeds
                    .iter()
                    .enumerate()
                    .filter(|(k, s)| *k != self.id.0 && s.as_ref() == Some(&value))
                    .count();
                if equal < self.n - 1 {
                    return;
                }
                self.updated = updated;
            }
        }
        self.output = Some(value);
        self.phase = Phase::Decided;
    }
}

impl Canonical for Phase {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
}

impl Canonical for ProcessState {
    fn encode(&self, out: &mut Vec<u8>) {
        self.id.encode(out);
        out.push(self.phase as u8);
        put_bool(out, self.started);
        self.input.encode(out);
        self.output.encode(out);
        self.known.encode(out);
        for (s, queue) in self.reorder.iter().enumerate() {
            put_u64(out, self.seen[s]);
            put_u64(out, u64::from(self.next_seq[s]));
            put_u64(out, queue.len() as u64);
            for m in queue.values() {
                m.encode(out);
            }
        }
        put_u64(out, self.deferred.len() as u64);
        for m in &self.deferred {
            m.encode(out);
        }
        put_u64(out, u64::from(self.send_seq));
        self.first_sent.encode(out);
        self.second_sent.encode(out);
        self.first_from.encode(out);
        self.second_from.encode(out);
        self.second_value.encode(out);
        self.completion.encode(out);
        out.push(match self.completed_via {
            None => 0,
            Some(CompletionRule::EqualFirstProposals) => 1,
            Some(CompletionRule::SecondProposals) => 2,
        });
        self.seeds.encode(out);
        put_u64(out, self.seed_count as u64);
        put_bool(out, self.updated);
    }
}
