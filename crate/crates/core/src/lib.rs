//! Sparse nonlinear regression with an L0 penalty: estimators, the constants in
//! their error bounds, and a Monte Carlo harness that checks the bounds.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod bounds;
pub mod config;
pub mod design;
pub mod domains;
pub mod error;
pub mod estimator;
pub mod expfam;
pub mod grids;
pub mod harness;
pub mod series;

pub use analytic::AnalyticFn;
pub use bounds::{BoundsReport, Theorem};
pub use design::{ColumnNorm, DesignMatrix, SparseParam};
pub use domains::{DomainSpec, Interval, PointSet};
pub use error::{Error, Result};
pub use estimator::{FitProblem, FitResult, Loss};
pub use expfam::ExpFamily;
pub use grids::CoveringGrid;
