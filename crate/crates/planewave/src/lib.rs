//! Scenario files, output formats and the `planewave` command-line tool
//! on top of [`planewave_core`].

pub mod commands;
pub mod error;
pub mod io;
pub mod scenario;

pub use error::{CliError, Result};
