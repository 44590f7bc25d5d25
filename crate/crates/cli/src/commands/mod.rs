//! Subcommand implementations.

pub mod al_run;
pub mod gen;
pub mod label;
pub mod predict;
pub mod report;
pub mod stats;
pub mod train;
