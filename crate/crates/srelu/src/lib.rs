//! File formats, CSV reports, thread-pool runner and the `srelu` CLI on top
//! of `srelu-core`.

pub mod cli;
pub mod config;
pub mod datasets;
pub mod formats;
pub mod report;
pub mod runner;

pub use srelu_core as core;
