//! Configuration, operations and report bundles behind the `dilatio` binary.

pub mod bundle;
pub mod config;
pub mod ops;

pub use bundle::{emit_report, run_suite, ExperimentReport, Format, ReportBundle};
pub use config::{parse_config, ConfigError, SuiteConfig};
pub use ops::Op;

/// Exit status of a run.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
