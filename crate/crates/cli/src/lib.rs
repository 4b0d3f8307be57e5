//! Command-line front end: CA management, synthetic data, server and client.

pub mod commands;
pub mod data;
pub mod error;
pub mod gendata;

pub use commands::{run, Cli};
pub use error::{Category, CliError};
