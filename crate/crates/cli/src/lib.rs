//! File formats, the bootstrap harness and the command-line interface for
//! `panelsurv-core`.

pub mod cli;
pub mod csv_io;
pub mod error;
pub mod harness;
pub mod model_file;

pub use error::{CliError, ExitStatus};
