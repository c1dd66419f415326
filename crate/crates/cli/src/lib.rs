//! Command-line tools and the JSON-over-HTTP query service built on
//! [`fullscan`]. The `fullscan` binary is a thin argument parser over these
//! modules.

pub mod commands;
pub mod config;
pub mod protocol;
pub mod server;
