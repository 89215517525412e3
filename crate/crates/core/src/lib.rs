// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bayesian quickest change detection under a global false-alarm constraint.
//!
//! The detector stops the first time the prior-averaged likelihood ratio
//! `G_n` reaches a threshold `A`, which bounds the probability of ever
//! raising a false alarm, `P_∞(τ_A < ∞) ≤ 1/A`, under any observation model.
//!
//! Crate layout:
//!
//! - [`prior`]: change-point prior `π_k`, tail `Π_n` and `C_π = Σ π_k |log π_k|`.
//! - [`models`]: exponential, Gaussian AR(p), linear state-space and mixture
//!   models with their log-likelihood ratio processes.
//! - [`detect`]: the statistic `G_n`, the rule `τ_A`, the posterior, Shiryaev's
//!   rule and the dominating one-sided times.
//! - [`renewal`]: overshoot constants and the closed-form PFA/ADD
//!   approximations, threshold calibration.
//! - [`simulate`]: Monte Carlo campaigns for PFA, detection delay moments,
//!   conditional delays and slope studies.

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod error;
pub mod models;
pub mod numerics;
pub mod prior;
pub mod renewal;
pub mod rng;
pub mod simulate;

pub use detect::{Calibration, DetectorState, ThresholdPolicy};
pub use error::{Error, Result};
pub use models::{
    ArModel, Capability, ChangeModel, ChangePoint, DeterministicDrift, Density, ExpModel, LlrProcess,
    MixtureModel, StateSpaceModel,
};
pub use prior::Prior;
pub use renewal::{AddOrder, OvershootEstimate};
pub use simulate::{ChangePointMode, EstimateSummary, Metric, TrialRecord};

/// Library version embedded in emitted reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
