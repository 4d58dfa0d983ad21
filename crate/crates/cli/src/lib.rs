//! Configuration, verification suites and reporting for the `qfsc` binary.

pub mod commands;
pub mod config;
pub mod report;
pub mod suite;
