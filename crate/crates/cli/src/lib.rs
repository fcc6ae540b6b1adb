//! Command-line harness: configuration, sweeps, artifacts and reports.

pub mod cell;
pub mod commands;
pub mod config;
pub mod output;
pub mod report;
pub mod sweep;

use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const INCONSISTENT: i32 = 4;
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Solver(String),
    Inconsistent(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Solver(_) => exit::SOLVER,
            Failure::Inconsistent(_) => exit::INCONSISTENT,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Inconsistent(m) => write!(f, "consistency finding: {m}"),
        }
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

/// Caps the worker pool at `HENON_THREADS` when set.
pub fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("HENON_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Failure::Usage(format!("HENON_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}
