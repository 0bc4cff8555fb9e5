//! Front end for the `ifes` solvers: `.ifes` spec files, the subcommands
//! behind the `ifes` binary, and their JSON reports.

pub mod commands;
pub mod report;
pub mod specfile;

pub use commands::{CliError, Overrides, Settings};
pub use report::RunReport;
pub use specfile::{Method, SpecFile};
