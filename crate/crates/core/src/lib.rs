//! Phase-space Monte Carlo simulation of pulsed entanglement transfer from a
//! two-mode-squeezed source cavity into two separated optomechanical
//! oscillators, with an exact Gaussian moment oracle for validation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the sweep driver uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod integrator;
mod linalg;
pub mod model;
pub mod oracle;
pub mod pulses;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PhysicalParams64 = model::PhysicalParams<f64>;
pub type ProtocolParams64 = model::ProtocolParams<f64>;
pub type PulseSchedule64 = model::PulseSchedule<f64>;
pub type Window64 = pulses::Window<f64>;
pub type TrajectoryState64 = sampling::TrajectoryState<f64>;
pub type TrajectoryEngine64 = integrator::TrajectoryEngine<f64>;
pub type MomentAccumulator64 = estimators::MomentAccumulator<f64>;
pub type CriterionResult64 = estimators::CriterionResult<f64>;
pub type QuadCovariance64 = oracle::QuadCovariance<f64>;

pub type ProtocolParams32 = model::ProtocolParams<f32>;
pub type PulseSchedule32 = model::PulseSchedule<f32>;
pub type TrajectoryEngine32 = integrator::TrajectoryEngine<f32>;
