//! Simulation and analysis toolkit for identifying discrete frequency modes
//! of single-photon-level pulses with atomic frequency combs.
//!
//! * [`spectral`]: comb absorption profiles and the causal medium response.
//! * [`propagation`]: pulse propagation, echo windows, analytic efficiency.
//! * [`mapping`]: time-to-space / frequency-to-time scheme and its decoder.
//! * [`detection`]: Monte Carlo photon counting and event files.
//! * [`analysis`]: echo efficiency and cross-talk estimates.
//! * [`planner`]: multiplexing capacity checks.
//!
//! Numeric types are generic; the aliases below fix them to `f64`, or to
//! `Ratio<i64>` where exact arithmetic is useful.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detection;
pub mod error;
pub mod mapping;
pub mod planner;
pub mod propagation;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Exact, Real};

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type CombSpecF64 = spectral::CombSpec<f64>;
pub type FrequencyGridF64 = spectral::FrequencyGrid<f64>;
pub type AbsorptionProfileF64 = spectral::AbsorptionProfile<f64>;
pub type TransferFunctionF64 = spectral::TransferFunction<f64>;
pub type PulseSpecF64 = propagation::PulseSpec<f64>;
pub type TemporalTraceF64 = propagation::TemporalTrace<f64>;
pub type EchoSummaryF64 = propagation::EchoSummary<f64>;
pub type SchemeConfigF64 = mapping::SchemeConfig<f64>;
pub type SchemeConfigExact = mapping::SchemeConfig<Rational>;
pub type PlatformLimitsF64 = planner::PlatformLimits<f64>;
pub type PlatformLimitsExact = planner::PlatformLimits<Rational>;
pub type PlanReportF64 = planner::PlanReport<f64>;
