//! Trial selection for EEG functional-connectivity analysis.
//!
//! The pipeline band-pass filters multichannel trials, projects them with
//! Common Spatial Patterns, classifies the per-trial covariances with an
//! L1-regularized logistic regression in the Log-Euclidean tangent space,
//! keeps only trials that were classified correctly with high confidence,
//! and compares weighted graph metrics built from all trials against those
//! built from the retained ones.

pub mod classifier;
pub mod csp;
pub mod dsp;
pub mod eegdata;
mod error;
mod matrix_serde;
pub mod fixture;
pub mod graphnet;
pub mod pipeline;
pub mod riemann;

pub use error::{Error, Result};
