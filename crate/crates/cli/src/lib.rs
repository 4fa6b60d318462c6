//! Library side of the `mpsc` command-line tool: instance parsing, command
//! execution and report formatting.

pub mod format;
pub mod parser;
pub mod run;

pub use run::{execute, execute_instance, Command, Outcome, RunConfig};
