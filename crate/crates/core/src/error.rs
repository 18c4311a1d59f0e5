// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Failures raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarError {
    #[error("{name} = {value} is outside its admissible domain")]
    OutOfDomain { name: &'static str, value: f64 },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(&'static str),
    #[error("conditional variance {0} is not positive")]
    NonpositiveVariance(f64),
    #[error("matrix is singular (determinant {0:e})")]
    SingularMatrix(f64),
    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
    #[error("significance level {0} has no tabulated critical value")]
    UnsupportedLevel(f64),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("empty set")]
    EmptySet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, BarError>;
