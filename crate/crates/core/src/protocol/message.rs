use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::{put_u64, Canonical};
use crate::value::{InitialValue, ProcessId, VectorValue};

/// Message kind tag without payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Initial,
    First,
    Second,
    Seed,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Initial, Kind::First, Kind::Second, Kind::Seed];

    fn tag(self) -> u8 {
        match self {
            Kind::Initial => 0,
            Kind::First => 1,
            Kind::Second => 2,
            Kind::Seed => 3,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Initial => "initial",
            Kind::First => "first",
            Kind::Second => "second",
            Kind::Seed => "seed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    InitialValue(InitialValue),
    FirstProposal(VectorValue),
    SecondProposal(VectorValue),
    DecisionSeed(VectorValue),
}

impl MessageKind {
    pub fn kind(&self) -> Kind {
        match self {
            MessageKind::InitialValue(_) => Kind::Initial,
            MessageKind::FirstProposal(_) => Kind::First,
            MessageKind::SecondProposal(_) => Kind::Second,
            MessageKind::DecisionSeed(_) => Kind::Seed,
        }
    }

    pub fn vector(&self) -> Option<&VectorValue> {
        match self {
            MessageKind::InitialValue(_) => None,
            MessageKind::FirstProposal(v) | MessageKind::SecondProposal(v) | MessageKind::DecisionSeed(v) => Some(v),
        }
    }
}

impl Canonical for MessageKind {
    fn encode(&self, out: &mut Vec<u8>) {
        out.push(self.kind().tag());
        match self {
            MessageKind::InitialValue(v) => v.encode(out),
            MessageKind::FirstProposal(v) | MessageKind::SecondProposal(v) | MessageKind::DecisionSeed(v) => {
                v.encode(out)
            }
        }
    }
}

/// A point-to-point message. `seq` numbers the sender's broadcasts from 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub sender: ProcessId,
    pub destination: ProcessId,
    pub seq: u32,
    pub kind: MessageKind,
}

impl Canonical for Message {
    fn encode(&self, out: &mut Vec<u8>) {
        put_u64(out, self.sender.0 as u64);
        put_u64(out, self.destination.0 as u64);
        put_u64(out, u64::from(self.seq));
        self.kind.encode(out);
    }
}

/// Same kind and payload to every other process, in destination-index order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Broadcast {
    pub seq: u32,
    pub kind: MessageKind,
}

impl Broadcast {
    /// The n-1 point-to-point copies, skipping the sender.
    pub fn messages(&self, sender: ProcessId, n: usize) -> impl Iterator<Item = Message> + '_ {
        (0..n).filter(move |&d| d != sender.0).map(move |d| Message {
            sender,
            destination: ProcessId(d),
            seq: self.seq,
            kind: self.kind.clone(),
        })
    }
}

/// Outbound broadcasts produced by one step, in emission order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub outbound: Vec<Broadcast>,
}

impl Effects {
    pub fn is_empty(&self) -> bool {
        self.outbound.is_empty()
    }

    pub fn extend(&mut self, other: Effects) {
        self.outbound.extend(other.outbound);
    }
}
