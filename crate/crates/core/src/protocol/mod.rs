//! One process's transition function for the three-phase vector consensus
//! algorithm (Initial, Proposals, Decision).
//!
//! Everything here is pure: a [`ProcessState`] plus a released [`Message`]
//! determines the next state and the outbound broadcasts. There is no clock,
//! no randomness and no I/O.

mod message;
mod process;

pub use message::{Broadcast, Effects, Kind, Message, MessageKind};
pub use process::{CompletionRule, Phase, ProcessState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("system needs at least 5 processes, got {n}")]
    TooFewProcesses { n: usize },
    #[error("process id {id} out of range for n={n}")]
    IdOutOfRange { id: ProcessId, n: usize },
    #[error("{0} already started")]
    AlreadyStarted(ProcessId),
    #[error("message for {destination} delivered to {at}")]
    WrongDestination { destination: ProcessId, at: ProcessId },
    #[error("{0} cannot send to itself")]
    SelfDelivery(ProcessId),
    #[error("duplicate seq {seq} from {sender}")]
    DuplicateSeq { sender: ProcessId, seq: u32 },
    #[error("first proposal needs exactly n-1 known values, have {known}")]
    FirstProposalArity { known: usize },
    #[error("malformed {kind} from {sender}: {reason}")]
    Malformed { sender: ProcessId, kind: Kind, reason: String },
    #[error("second proposal from {sender} differs from one already processed")]
    ConflictingSecondProposal { sender: ProcessId },
    #[error("no source for slot {slot} while building the second proposal")]
    MissingSlot { slot: usize },
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// How a process leaves the Decision phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Decide after n-2 decision seeds from distinct other processes.
    #[default]
    SeedThreshold,
    /// Decide once n-1 equal decisions are known, own included. Experimental;
    /// can block forever under a crash.
    EqualDecisions,
}

/// Rule switches. All on is the algorithm; turning one off yields a mutant
/// used to show the property checkers are not vacuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Rules {
    pub order: bool,
    pub blend_first: bool,
    pub blend_second: bool,
    pub update: bool,
    pub decision: DecisionRule,
}

impl Default for Rules {
    fn default() -> Self {
        Rules {
            order: true,
            blend_first: true,
            blend_second: true,
            update: true,
            decision: DecisionRule::SeedThreshold,
        }
    }
}

/// The four single-rule mutants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutant {
    NoOrderRule,
    NoBlendFirst,
    NoBlendSecond,
    NoUpdateRule,
}

impl Mutant {
    pub const ALL: [Mutant; 4] =
        [Mutant::NoOrderRule, Mutant::NoBlendFirst, Mutant::NoBlendSecond, Mutant::NoUpdateRule];

    pub fn rules(self) -> Rules {
        let mut rules = Rules::default();
        match self {
            Mutant::NoOrderRule => rules.order = false,
            Mutant::NoBlendFirst => rules.blend_first = false,
            Mutant::NoBlendSecond => rules.blend_second = false,
            Mutant::NoUpdateRule => rules.update = false,
        }
        rules
    }

    pub fn name(self) -> &'static str {
        match self {
            Mutant::NoOrderRule => "no-order-rule",
            Mutant::NoBlendFirst => "no-blend-rule-1",
            Mutant::NoBlendSecond => "no-blend-rule-2",
            Mutant::NoUpdateRule => "no-update-rule",
        }
    }
}
