//! Property checking over scripted cases, seeded fuzzing and bounded
//! exhaustive search, with trace minimization for counterexamples.

pub mod cases;
mod fuzz;
mod minimize;
mod properties;
mod search;

pub use cases::{run_case_suite, run_case_suite_with_values, split_decision_scenario, CaseResult};
pub use fuzz::{crash_grid, fuzz, FuzzCounterexample, FuzzOptions, FuzzReport, LiftCounts, PropertyCounts};
pub use minimize::minimize;
pub use properties::{check_properties, evaluate, safety_violation, Property, PropertyReport, Status};
pub use search::{explore, ExploreOptions, ExploreOutcome, ExploreReport, ExploreStats};

#[cfg(test)]
mod tests;
