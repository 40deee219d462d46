//! Characterization of individual response profiles in repeatedly measured
//! visual-analogue-scale data.
//!
//! A user's normalized responses are split into a center range and two tails.
//! The center range is modeled as flat, unimodal or bimodal (the main
//! profile), the tails by a shape-restricted Beta (extreme, dis-acquiescent or
//! acquiescent style), and the two are combined into one mixture whose tail
//! weight is chosen on a grid. Model choices are made by AIC. Unbalanced
//! repeated measures are handled by stratified bootstrap resampling.

pub mod bootstrap;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
