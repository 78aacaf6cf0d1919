//! Configuration, dispatch and CSV output of the `damopt` binary.

mod config;
mod run;

use std::io::Write;
use std::path::Path;

use damopt_core::ConvergenceTable;

pub use config::{
    known_keys, parse_config, parse_config_text, parse_with_text, CommandName, LoadArg, MassArg,
    ModeArg, ReferenceArg, RunConfig, StepperArg, VariantArg,
};
pub use run::run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Solver(damopt_core::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<damopt_core::Error> for CliError {
    fn from(e: damopt_core::Error) -> Self {
        use damopt_core::Error as E;
        match e {
            E::InvalidParameter(m) => CliError::Usage(m),
            e => CliError::Solver(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use damopt_core::Error as E;
        match self {
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(
                E::NonConvergence { .. } | E::ContractionRefused { .. } | E::LineSearchFailure { .. },
            ) => EXIT_NONCONVERGENCE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

/// Writes the CSV form of `table` to `path`.
pub fn emit_csv(table: &ConvergenceTable, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(table.to_csv().as_bytes())?;
    f.flush()
}
