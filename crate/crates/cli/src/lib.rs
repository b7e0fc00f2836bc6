//! Experiment driver for `kirchhoff-core`: configuration files, sweep
//! tables, verification reports and the run pipeline behind the
//! `kirchhoff` binary.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod profile_doc;
pub mod report;
pub mod table;

pub use config::{validate, Diagnostic, ExperimentConfig, Mode};
pub use pipeline::{run, RunError, RunOutcome, Setup};
pub use report::VerificationReport;
