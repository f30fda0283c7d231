//! Post-run verification and sweep statistics.

mod bounds;
mod report;
mod summary;
mod verdict;
mod verify;

pub use bounds::{
    binomial_in_range, check_message_bound, check_role_concentration, check_time_bound,
    chernoff_prediction, kappa, log2_sq, tau, upsilon, BoundVerdict, ConcentrationVerdict,
    ScalingPoint, Series, MIN_CONCENTRATION_RUNS, PHASES, SCALING_TOLERANCE,
};
pub use report::{FailureKind, RunFlags, RunReport};
pub use summary::{summarize, write_csv, SweepRow};
pub use verdict::{any_hard_failure, Status, Verdict};
pub use verify::{
    verify_liveness, verify_safety, verify_trace, Liveness, SafetyVerdict, TraceVerdict,
};

#[cfg(test)]
mod tests;
