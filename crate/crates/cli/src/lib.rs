//! Command-line harness for `imopt`: seeded problem generators, a flat
//! `key=value` run configuration, solver dispatch with CSV traces, the
//! Sinkhorn comparison table and the acceptance suite.

pub mod compare;
pub mod config;
pub mod problems;
pub mod runner;
pub mod selftest;
pub mod validate;
