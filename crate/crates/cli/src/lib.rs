//! Command-line front end of `quadric-core`: job documents, command
//! dispatch and CSV/JSON tables.

pub mod config;
pub mod error;
pub mod run;
pub mod table;

pub use config::{emit_config, parse_config, JobConfig};
pub use error::{CliError, ErrorKind};
pub use run::{execute, run, RunOptions};
