//! Calibrated evaluation toolkit for machine-generated-text detectors:
//! adversarial attack generation, per-domain threshold calibration at a
//! fixed false-positive rate, stratified TPR reporting, and team rankings.

pub mod attack;
pub mod calibration;
pub mod config;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
