// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point analysis for bounded count series under the binomial
//! AR(1) model.
//!
//! - [`bar_model`]: the process, its kernel, simulation.
//! - [`estimation`]: CLS, MQL and CML estimators for one segment.
//! - [`cusum`]: CUSUM tests for a single parameter change.
//! - [`segmentation`]: MDL segmentation searched by a genetic algorithm.
//! - [`evaluation`]: accuracy metrics and Monte Carlo harnesses.

#![forbid(unsafe_code)]

pub mod bar_model;
pub mod cusum;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod linalg;
pub mod rng;
pub mod segmentation;

pub use bar_model::{BarParams, BoundedSeries, SegmentedModel};
pub use error::{BarError, Result};
pub use estimation::{Method, ParamEstimate};
pub use linalg::Matrix2;
