//! Selective learning: choose a window of the future and a model to deploy on it.
//!
//! The crate provides the learners ([`algorithms`]), generalized mean
//! prediction under Bregman losses ([`convexity`]), hard-instance generators
//! ([`adversaries`]) and an exact-expectation oracle with inequality checkers
//! ([`oracle`]). Numeric code is generic over [`Scalar`] (`f32` or `f64`).

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversaries;
pub mod algorithms;
pub mod convexity;
pub mod error;
pub mod instance;
pub mod oracle;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use instance::{excess_risk, scale_profile, window_avg_loss, Decision, Instance, Origin, ScaleProfile, WindowChoice};
pub use scalar::Scalar;

pub type Instance64 = Instance<f64>;
pub type Instance32 = Instance<f32>;
pub type Decision64 = Decision<f64>;
pub type Decision32 = Decision<f32>;
pub type ScaleProfile64 = ScaleProfile<f64>;
pub type ScaleProfile32 = ScaleProfile<f32>;
pub type PointSequence64 = convexity::PointSequence<f64>;
pub type PointSequence32 = convexity::PointSequence<f32>;
