//! Command-line front end: configuration, run orchestration and plots.

pub mod config;
pub mod plots;
pub mod run;
pub mod svg;
