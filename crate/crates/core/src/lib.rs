//! Simulation and regression toolkit for scalar and vector Tolles-Lawson
//! platform calibration of airborne magnetometers.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod error_analysis;
pub mod flight;
pub mod frames;
pub mod noise;
pub mod pipeline;
pub mod seed;
pub mod sensors;
pub mod spectral;
pub mod tl;

pub use error::{Error, Result};
