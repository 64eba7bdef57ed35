//! The asynchronous message system: a buffer of sent-but-undelivered
//! messages, a scheduler that picks the next event, crash injection, and
//! replayable JSONL traces.

mod config;
mod network;
mod run;
mod scheduler;
mod trace;

pub use config::{
    Bounds, CrashPoint, CrashSpec, Filter, ScenarioConfig, SchedulerSpec, ScriptStep, DEFAULT_FAIRNESS_BOUND,
    DEFAULT_MAX_EVENTS,
};
pub use network::{BufferEntry, Configuration, EntryKey, Event};
pub use run::{replay, replay_lenient, run, run_scenario, run_with, stop_reason};
pub use scheduler::{build_scheduler, AdversarialLifo, Fifo, Scheduler, Scripted, SeededRandom};
pub use trace::{ProcessOutcome, RunVerdict, StopReason, Trace, TRACE_FORMAT};

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::value::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("{field}: {message}")]
    Config { field: String, message: String },
    #[error("{process}: {source}")]
    Protocol { process: ProcessId, source: ProtocolError },
    #[error("event not enabled: {0}")]
    NotEnabled(Event),
    #[error("script step {step}: {detail}")]
    Script { step: usize, detail: String },
    #[error("trace line {line}: {detail}")]
    TraceFormat { line: usize, detail: String },
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
}

impl SimError {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        SimError::Config { field: field.into(), message: message.into() }
    }
}
