//! Quantile risk minimization across domains.
//!
//! A predictor's per-domain risks are treated as a sample from its risk
//! distribution. [`riskdist`] estimates that distribution (Gaussian, kernel
//! density, or empirical) and differentiates its α-quantile with respect to the
//! risks; [`trainer`] minimizes that quantile by gradient descent; [`semlab`]
//! supplies synthetic multi-domain data with known structure; [`evalkit`] scores
//! predictors on held-out domains through their quantiles.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below fix the scalar to `f64`, which the CLI and experiments use.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evalkit;
pub mod numkit;
pub mod riskdist;
mod scalar;
pub mod semlab;
pub mod trainer;

pub use error::{QrmError, Result};
pub use scalar::Scalar;

pub type AlphaLevel64 = numkit::AlphaLevel<f64>;
pub type RiskVector64 = riskdist::RiskVector<f64>;
pub type RiskModel64 = riskdist::RiskModel<f64>;
pub type BandwidthRule64 = riskdist::BandwidthRule<f64>;
pub type DomainSpec64 = semlab::DomainSpec<f64>;
pub type EnvironmentSet64 = semlab::EnvironmentSet<f64>;
pub type DomainDataset64 = semlab::DomainDataset<f64>;
pub type Moments64 = semlab::Moments<f64>;
pub type Predictor64 = trainer::Predictor<f64>;
pub type Objective64 = trainer::Objective<f64>;
pub type TrainConfig64 = trainer::TrainConfig<f64>;
pub type EvalReport64 = evalkit::EvalReport<f64>;
