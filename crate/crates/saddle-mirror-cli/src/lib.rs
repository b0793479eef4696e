//! Experiment harness around the `saddle-mirror` solvers: JSON experiment
//! specs, sweep expansion, CSV trace persistence, a verification suite, and
//! the `saddle-mirror` command-line interface.
//!
//! The pieces fit together as
//!
//! ```text
//! spec.json ── config::load_spec ──▶ ExperimentSpec
//!                                        │ experiment::run_experiment
//!                                        ▼
//!                        out/<name>_run0000.csv …  +  <name>_summary.json
//! ```
//!
//! Reruns of the same spec produce byte-identical files: solver traces are
//! deterministic in their config, CSV floats are written with 17 significant
//! digits, and the summary JSON carries no timing information.

pub mod config;
pub mod experiment;
pub mod trace_io;
pub mod verify;

use std::fmt;
use std::process::ExitCode;

/// Harness-level failure with its CLI exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 1).
    Parse(String),
    /// A spec that parsed but violates invariants (exit 1).
    Validation(String),
    /// Verification suite failures (exit 2).
    Verification(String),
    /// IO or solver failure at run time (exit 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => ExitCode::from(1),
            CliError::Verification(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "invalid spec: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
