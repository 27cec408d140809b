//! Experiment runner for defectlab: config parsing, experiment dispatch,
//! CSV/JSON/SVG reports and the acceptance suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod families;
pub mod report;
pub mod run;
pub mod selftest;
pub mod svg;

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "LAB_THREADS";
