//! Configuration, reports and subcommand dispatch behind the `guerra` binary.

pub mod commands;
pub mod config;
pub mod report;

/// Environment variable holding the worker-thread count. It changes speed
/// only, never results.
pub const WORKERS_ENV: &str = "GUERRA_WORKERS";

/// Exit status for a run whose checks all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status when some check falls outside its tolerance.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for usage, configuration and I/O errors.
pub const EXIT_USAGE: i32 = 2;
