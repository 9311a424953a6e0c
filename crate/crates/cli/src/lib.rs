//! Command-line front end and HTTP session service for `condmt`.

pub mod cli;
pub mod server;

pub use cli::run;
