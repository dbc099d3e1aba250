//! Experiment harness for the secure SWIPT solvers: batch runs over seeds and
//! sweep values, baselines, CSV/SVG/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod experiment;
pub mod output;
pub mod spec;
pub mod svg;

pub use experiment::{run_experiment, ResultRow, RunOptions, RunOutcome};
pub use spec::{ExperimentSpec, Method, Mode};
