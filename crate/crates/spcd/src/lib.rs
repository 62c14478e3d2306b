//! Config files, CSV output, parallel grid execution and the command-line
//! front end for `spcd-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod parallel;
pub mod table;

pub use config::{Overrides, RunConfig};
pub use error::{Result, SpcdError};
