//! Deterministic discrete-event network simulator.

mod adversary;
mod engine;
mod flood;
mod run;
mod trace;

pub use adversary::{
    builtin_adversaries, Adversary, AdversaryKind, DisputeStress, RandomOrder, RecordedDelays,
    RecordedOrder, UniformDelay, UnitDelay,
};
pub use engine::{DelayPolicy, Transmission};
pub use flood::flood_only;
pub use run::{draw_coins, replay, run, Roles, RunOptions, RunOutcome, DEFAULT_EVENT_BUDGET};
pub use trace::{Record, Trace, TraceHeader};

#[cfg(test)]
mod tests;
