//! Batch driver: configuration, presets, artifact bundles and the exit-code contract.

// Validation negates comparisons so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
