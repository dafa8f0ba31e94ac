//! Multi-factor forward CPI models with Gaussian short rates.
//!
//! The crate covers the full workflow: market inputs, the short-rate model,
//! factor loadings and their calibration, closed-form zero-coupon and
//! year-on-year prices, a Monte Carlo engine, leverage-function calibration
//! and the simplified calibration-free model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod corr_calib;
pub mod error;
pub mod factors;
pub mod g1pp;
pub mod leverage;
pub mod market_data;
pub mod mc;
pub mod normal;
pub mod quad;
pub mod simplified;
pub mod workflows;

pub use error::{Error, Result};
