//! Experiment driver behind the `specsolve` binary: config parsing, study
//! dispatch and CSV / JSON artifacts.

pub mod config;
pub mod output;
pub mod studies;
