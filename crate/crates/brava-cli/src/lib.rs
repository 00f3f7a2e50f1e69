//! Library surface of the `brava` binary, exposed so integration tests can
//! drive the pipeline commands directly.

pub mod commands;
pub mod config;
