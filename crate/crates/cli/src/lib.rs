//! Command implementations behind the `phyllo` binary.

pub mod commands;
pub mod pipeline;
pub mod serve;

pub use pipeline::UsageError;
