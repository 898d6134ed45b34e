//! Configuration parsing for the `gradstream` command-line tool.

pub mod config;

pub use config::{parse_config, Entries};
