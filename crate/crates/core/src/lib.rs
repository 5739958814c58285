//! Isotonic calibration of right-censored survival predictions.
//!
//! Risk scores and initial survival/censoring models go in; calibrated
//! survival surfaces that are monotone in both risk and time come out. The
//! crate also fits linear Cox models, simulates benchmark data and computes
//! censoring-aware evaluation metrics.

pub mod calibrate;
pub mod cli;
pub mod coxfit;
pub mod data;
pub mod error;
pub mod experiment;
pub mod isotonic;
pub mod metrics;
pub mod simgen;

pub use error::{Error, Result};
