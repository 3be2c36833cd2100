//! Command-line front end for `impdde`: systems described in JSON (or picked
//! from the built-in set) are solved, checked and extended, with
//! trajectories written as CSV and reports as JSON.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;

pub use commands::{CliError, Common, Status};
pub use config::{load_path, load_str, ConfigError, Loaded};
