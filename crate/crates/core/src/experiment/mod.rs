//! Declarative experiments and the three command entry points.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or parse
//! error, 3 resource guard.

mod bound;
mod config;
mod run;
mod verify;

pub use bound::{format_bound, BoundReport};
pub use config::{EnsembleSpec, ExperimentConfig, GeneratorKind, TargetSpec};
pub use run::{run_experiment, write_outputs, ResourceScore, ResultRecord};
pub use verify::{ensemble_battery, run_suite, BatteryInstance, Suite, BATTERY_Q_MIN};

use crate::harness::BoundCheckResult;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

/// Process exit code for an error raised while preparing or running an experiment.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResourceLimit(_) => EXIT_GUARD,
        _ => EXIT_USAGE,
    }
}

pub fn exit_code_for_checks(checks: &[BoundCheckResult]) -> i32 {
    if checks.iter().all(|c| c.satisfied) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// One human-readable line per check.
pub fn format_check_line(c: &BoundCheckResult) -> String {
    format!(
        "{:<40} empirical={:<13.6e} bound={:<13.6e} margin={:<13.6e} {}  [{}]",
        c.name,
        c.empirical,
        c.bound,
        c.margin(),
        if c.satisfied { "PASS" } else { "FAIL" },
        c.instance_summary
    )
}
