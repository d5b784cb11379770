//! Orchestration of the aeromag simulator: scenario runs, error tables,
//! noise benchmarks and trajectory export.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod bench;
pub mod config;
pub mod error;
pub mod export;
pub mod output;
pub mod scenario;
