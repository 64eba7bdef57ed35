//! A deterministic laboratory for a three-phase vector consensus algorithm that
//! targets fully asynchronous systems with at most one crash.
//!
//! * [`protocol`] holds the per-process transition function.
//! * [`sim`] executes the asynchronous message-system model with pluggable
//!   schedulers, crash injection and replayable traces.
//! * [`explore`] checks agreement, validity, termination and the structural
//!   invariants over scripted scenarios, seeded fuzzing and bounded exhaustive search.
//! * [`binary`] derives binary decisions from agreed vectors and compares the two
//!   termination paradigms on a lock-step synchronous harness.

pub mod binary;
pub mod canonical;
pub mod explore;
pub mod protocol;
pub mod sim;
pub mod value;

pub use value::{InitialValue, ProcessId, VectorValue};
