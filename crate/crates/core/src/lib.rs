//! Numerical laboratory for heat-semigroup Besov spaces on finite
//! approximations of fractals and Euclidean grids.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod heat;
pub mod mmspace;
pub mod report;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use fit::ScalingFit;
pub use mmspace::MetricMeasureSpace;
pub use scalar::Real;

pub type Space = MetricMeasureSpace<f64>;
pub type Space32 = MetricMeasureSpace<f32>;
