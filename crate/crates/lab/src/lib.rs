//! Experiment harness for the `halfheat` operators: configuration, experiments,
//! reports and the command-line interface.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;
