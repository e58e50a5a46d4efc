//! Experiment driver for the `steinvi` library: configuration files, run
//! orchestration, plot-ready artifact files, and run comparison.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;

use std::fmt;

/// Driver errors, split by the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input files (exit code 1).
    Config(String),
    /// Numerical or runtime failure during an experiment (exit code 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<steinvi::Error> for CliError {
    fn from(e: steinvi::Error) -> Self {
        use steinvi::Error as E;
        match &e {
            E::Config(_) | E::Input(_) | E::DimensionMismatch { .. } | E::EmptySpectrum => {
                CliError::Config(e.to_string())
            }
            E::Factorization(_)
            | E::DegenerateBandwidth
            | E::OutsideSupport { .. }
            | E::ZeroGradientStack
            | E::NonFinite { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
