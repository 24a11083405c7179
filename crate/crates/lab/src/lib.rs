//! Scenario runner, file formats and verification suite.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csvio;
pub mod estimates;
pub mod measure_file;
pub mod scenario;
pub mod selfcheck;
pub mod svg;

use std::fmt;

/// Exit status for a passing run.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a gate fails or a solver gives up.
pub const EXIT_GATE: i32 = 1;
/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum LabError {
    /// Bad or inconsistent configuration; nothing has been written.
    Config(String),
    /// Malformed input data file.
    Data(String),
    Io(std::io::Error),
    Csv(csv::Error),
    Core(axibouss_core::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Data(_) => EXIT_USAGE,
            _ => EXIT_GATE,
        }
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(m) => write!(f, "config error: {m}"),
            LabError::Data(m) => write!(f, "data error: {m}"),
            LabError::Io(e) => write!(f, "i/o error: {e}"),
            LabError::Csv(e) => write!(f, "csv error: {e}"),
            LabError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for LabError {}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e)
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Csv(e)
    }
}

impl From<axibouss_core::Error> for LabError {
    fn from(e: axibouss_core::Error) -> Self {
        LabError::Core(e)
    }
}
