//! Deterministic simulation of personalized short-video playback and
//! delivery: QoP-to-profit modelling, playback deciders, multi-CDN billing
//! and scheduling, ladder delivery, transcoding allocation, publishing and
//! experiment estimators.
//!
//! Numeric cores are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

// `!(x > 0.0)` is the idiom here for rejecting NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdn;
pub mod delivery;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod model;
pub mod playback;
pub mod publish;
pub mod scalar;
pub mod scenario;
pub mod uiae;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DeliveryProblemF32 = delivery::DeliveryProblem<f32>;
pub type DeliveryProblemF64 = delivery::DeliveryProblem<f64>;
pub type DeliveryDecisionF32 = delivery::DeliveryDecision<f32>;
pub type DeliveryDecisionF64 = delivery::DeliveryDecision<f64>;
pub type ForecastF32 = delivery::Forecast<f32>;
pub type ForecastF64 = delivery::Forecast<f64>;
pub type VendorSeriesF32 = cdn::VendorSeries<f32>;
pub type VendorSeriesF64 = cdn::VendorSeries<f64>;
pub type BillF32 = cdn::Bill<f32>;
pub type BillF64 = cdn::Bill<f64>;
pub type EconomyParamsF32 = model::EconomyParams<f32>;
pub type EconomyParamsF64 = model::EconomyParams<f64>;
pub type ProfitBreakdownF32 = model::ProfitBreakdown<f32>;
pub type ProfitBreakdownF64 = model::ProfitBreakdown<f64>;
pub type QuotaControllerF32 = uiae::QuotaController<f32>;
pub type QuotaControllerF64 = uiae::QuotaController<f64>;
pub type PlantModelF32 = uiae::PlantModel<f32>;
pub type PlantModelF64 = uiae::PlantModel<f64>;
pub type QoeWeightsF32 = playback::QoeWeights<f32>;
pub type QoeWeightsF64 = playback::QoeWeights<f64>;
pub type LossKindF32 = loss::LossKind<f32>;
pub type LossKindF64 = loss::LossKind<f64>;
