//! Direction-of-arrival estimation from received signal strength with
//! explicit modelling of missed detections.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64` (or `f32` where noted). File I/O, the
//! simulation harness and the field-data pipeline work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod angle;
pub mod detection;
pub mod error;
pub mod estimator;
pub mod field_data;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod patterns;
pub mod scalar;
pub mod sim_harness;
pub mod special;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SensorPattern64 = patterns::SensorPattern<f64>;
pub type SensorPattern32 = patterns::SensorPattern<f32>;
pub type ArrayConfig64 = patterns::ArrayConfig<f64>;
pub type ArrayConfig32 = patterns::ArrayConfig<f32>;
pub type Observation64 = detection::Observation<f64>;
pub type Observation32 = detection::Observation<f32>;
pub type SourceState64 = detection::SourceState<f64>;
pub type Grids64 = likelihood::Grids<f64>;
pub type Grids32 = likelihood::Grids<f32>;
pub type LikelihoodGrid64 = likelihood::LikelihoodGrid<f64>;
pub type LikelihoodGrid32 = likelihood::LikelihoodGrid<f32>;
pub type Estimate64 = estimator::Estimate<f64>;
pub type Estimator64 = estimator::Estimator<f64>;
pub type Estimator32 = estimator::Estimator<f32>;
pub type BearingProfile64 = estimator::BearingProfile<f64>;
pub type FilterConfig64 = tracker::FilterConfig<f64>;
pub type TrackPoint64 = tracker::TrackPoint<f64>;
pub type Epoch64 = tracker::Epoch<f64>;
