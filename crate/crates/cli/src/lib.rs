//! Scenario-driven front end for `spectral-lab`: a strict configuration
//! grammar, one pipeline per module, CSV and JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipelines;
pub mod report;
pub mod run;
pub mod scenario;

pub use run::{output_root, run_file, run_scenario, run_suite, RunOutcome, OUT_ENV};
pub use scenario::{Pipeline, Scenario, ScenarioError};
