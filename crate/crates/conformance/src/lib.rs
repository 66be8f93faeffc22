//! Reference oracles, random generators and test suites for `rppm-core`.
//!
//! Everything here is independent of the engine's evaluation code: path
//! satisfaction is recomputed as relation algebra over the edge list, and the
//! history constraints use the reference decisions of
//! [`rppm_core::constraints`] with base decisions derived from the generated
//! layouts.

pub mod fixtures;
pub mod generate;
pub mod oracle;
pub mod scenarios;
pub mod suites;
