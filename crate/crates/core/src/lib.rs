//! Mutual-information rate regions for integrated sensing and communications.
//!
//! The crate evaluates communication rates (Shannon log-det capacity) and
//! sensing rates (MI between a Gaussian target response and its echo) for
//! downlink and uplink ISAC and for frequency-division (FDSAC) baselines. It
//! optimizes the power allocations involved, traces ergodic rate regions by
//! Monte Carlo over Rayleigh channels and estimates high-SNR slopes.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the scenario evaluators and
//! the CLI use.

// `!(x > 0)` is the NaN-rejecting form used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod downlink;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod mi_core;
pub mod model;
pub mod oracle;
pub mod region;
pub mod scalar;
pub mod uplink;
pub mod validate;

pub use error::{Error, Result};
pub use model::{
    default_scenario, exp_corr_matrix, PowerBudget, ScenarioConfig, ScenarioKind, SlopeEstimate, SystemDims,
};
pub use scalar::Real;

pub type CMatF64 = scalar::CMat<f64>;
pub type CVecF64 = scalar::CVec<f64>;
pub type RatePointF64 = model::RatePoint<f64>;
pub type RateRegionF64 = model::RateRegion<f64>;
pub type CommChannelF64 = model::CommChannel<f64>;
pub type TargetStatsF64 = model::TargetResponseStats<f64>;
pub type NoiseModelF64 = mi_core::NoiseModel<f64>;
pub type ErgodicF64 = mc::Ergodic<f64>;
pub type RegionRunF64 = downlink::RegionRun<f64>;
pub type CurveRowF64 = downlink::CurveRow<f64>;

pub type RatePointF32 = model::RatePoint<f32>;
pub type TargetStatsF32 = model::TargetResponseStats<f32>;
pub type NoiseModelF32 = mi_core::NoiseModel<f32>;
