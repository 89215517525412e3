// SPDX-License-Identifier: MIT OR Apache-2.0

//! Overshoot constants and closed-form performance approximations.
//!
//! `ζ = lim E_1 e^{-κ_b}` and `κ̄ = lim E_1 κ_b` are the limiting moments of
//! the overshoot `κ_b = Z_{η_b}^1 - b` of the one-sided test
//! `η_b = min{n : Z_n^1 ≥ b}`. They feed the overshoot-corrected PFA
//! `ζ/A`, the corrected calibration `A = 1/(ζα)` and the higher-order delay
//! approximations. The constants are estimated by Monte Carlo at a single
//! large `b`; the exponential model has them in closed form.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{one_sided_test, Calibration, OneSidedOutcome, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::models::ChangeModel;
use crate::numerics::mean_and_se;
use crate::rng::{trial_rng, Stream};

/// Censoring fraction above which an overshoot estimate is refused.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;
/// Censoring fraction above which a warning is logged.
pub const WARN_CENSORED_FRACTION: f64 = 0.001;

/// Default threshold for overshoot estimation, `max(25, 25 q)`.
pub fn default_overshoot_threshold(q: f64) -> f64 {
    25f64.max(25.0 * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootEstimate {
    pub zeta_hat: f64,
    pub kappa_bar_hat: f64,
    pub se_zeta: f64,
    pub se_kappa: f64,
    pub b_used: f64,
    pub n_trials: usize,
    pub censored: usize,
    pub horizon: usize,
}

/// Raw overshoots of `η_b` under `P_1`, one per uncensored trial, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct OvershootSamples {
    pub overshoots: Vec<f64>,
    pub censored: usize,
    pub horizon: usize,
}

/// `ceil(10 b / q)`.
pub fn overshoot_horizon(b: f64, q: f64) -> usize {
    (10.0 * b / q).ceil().max(1.0) as usize
}

pub fn overshoot_samples<M: ChangeModel>(model: &M, b: f64, n_trials: usize, seed: u64) -> Result<OvershootSamples> {
    if !(b > 0.0) {
        return Err(Error::invalid("b", format!("must be positive, got {b}")));
    }
    let horizon = overshoot_horizon(b, model.kl_number());
    let outcomes: Vec<OneSidedOutcome> = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial, Stream::Observations);
            one_sided_test(model, b, horizon, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut overshoots = Vec::with_capacity(n_trials);
    let mut censored = 0;
    for outcome in outcomes {
        match outcome {
            OneSidedOutcome::Crossed { overshoot, .. } => overshoots.push(overshoot),
            OneSidedOutcome::Censored { .. } => censored += 1,
        }
    }
    Ok(OvershootSamples {
        overshoots,
        censored,
        horizon,
    })
}

/// Monte Carlo estimate of `ζ` and `κ̄` at threshold `b`.
pub fn estimate_overshoot<M: ChangeModel>(model: &M, b: f64, n_trials: usize, seed: u64) -> Result<OvershootEstimate> {
    if n_trials < 2 {
        return Err(Error::invalid("n_trials", "at least two trials are required"));
    }
    if !model.nonarithmetic() {
        log::warn!("model `{}` is declared arithmetic; overshoot limits may not exist", model.name());
    }
    let samples = overshoot_samples(model, b, n_trials, seed)?;
    let fraction = samples.censored as f64 / n_trials as f64;
    if fraction > MAX_CENSORED_FRACTION {
        return Err(Error::ExcessiveCensoring {
            censored: samples.censored,
            n_trials,
            horizon: samples.horizon,
        });
    }
    if fraction > WARN_CENSORED_FRACTION {
        log::warn!(
            "{} of {n_trials} overshoot trials censored at horizon {}",
            samples.censored,
            samples.horizon
        );
    }
    let exp_neg: Vec<f64> = samples.overshoots.iter().map(|k| (-k).exp()).collect();
    let (zeta_hat, se_zeta) = mean_and_se(&exp_neg);
    let (kappa_bar_hat, se_kappa) = mean_and_se(&samples.overshoots);
    Ok(OvershootEstimate {
        zeta_hat,
        kappa_bar_hat,
        se_zeta,
        se_kappa,
        b_used: b,
        n_trials,
        censored: samples.censored,
        horizon: samples.horizon,
    })
}

/// Overshoot-corrected global PFA `ζ / A`.
pub fn pfa_corrected(threshold: f64, zeta: f64) -> Result<f64> {
    if !(threshold > 1.0) {
        return Err(Error::invalid("A", format!("threshold must exceed 1, got {threshold}")));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::invalid("zeta", format!("must lie in (0, 1], got {zeta}")));
    }
    Ok(zeta / threshold)
}

/// `A = 1/α` (conservative) or `A = 1/(ζ α)` (overshoot-corrected).
pub fn calibrate_threshold(alpha: f64, mode: Calibration, zeta: Option<f64>) -> Result<ThresholdPolicy> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    match mode {
        Calibration::ConservativeBound => ThresholdPolicy::new(1.0 / alpha, mode),
        Calibration::OvershootCorrected => {
            let zeta = zeta.ok_or_else(|| Error::invalid("zeta", "overshoot-corrected calibration needs ζ"))?;
            if !(zeta > 0.0 && zeta <= 1.0) {
                return Err(Error::invalid("zeta", format!("must lie in (0, 1], got {zeta}")));
            }
            ThresholdPolicy::new(1.0 / (zeta * alpha), mode)
        }
        Calibration::Explicit => Err(Error::invalid("calibration", "explicit thresholds are not calibrated from α")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddOrder {
    /// `(log A + C_π - 1) / I`; ignores the overshoot.
    FirstOrder,
    /// `(log A + C_π + κ̄ - 1) / I`.
    HigherOrder,
    /// `(log A + C_π) / q`.
    NoKappaNoMinusOne,
}

/// Approximation of `ADD^π(τ_A) = E^π(τ_A - λ | τ_A ≥ λ)`.
pub fn add_approx(threshold: f64, kl: f64, entropy: f64, kappa_bar: f64, order: AddOrder) -> f64 {
    delay_approx(threshold.ln() + entropy, kl, kappa_bar, order)
}

/// Approximation of `E_k(τ_A - k | τ_A ≥ k)` with `log(A/π_k)` in place of `log A + C_π`.
pub fn cond_add_approx(threshold: f64, pi_k: f64, kl: f64, kappa_bar: f64, order: AddOrder) -> Result<f64> {
    if !(pi_k > 0.0 && pi_k <= 1.0) {
        return Err(Error::invalid("pi_k", format!("must lie in (0, 1], got {pi_k}")));
    }
    Ok(delay_approx((threshold / pi_k).ln(), kl, kappa_bar, order))
}

fn delay_approx(level: f64, kl: f64, kappa_bar: f64, order: AddOrder) -> f64 {
    match order {
        AddOrder::FirstOrder => (level - 1.0) / kl,
        AddOrder::HigherOrder => (level + kappa_bar - 1.0) / kl,
        AddOrder::NoKappaNoMinusOne => level / kl,
    }
}

/// One row of the approximation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    #[serde(rename = "A")]
    pub threshold: f64,
    pub fo_add: f64,
    pub ho_add: f64,
    pub pfa_corrected: f64,
}

pub fn approx_table(grid: &[f64], kl: f64, entropy: f64, kappa_bar: f64, zeta: f64) -> Result<Vec<ApproxRow>> {
    if !(kl > 0.0) {
        return Err(Error::invalid("I", format!("must be positive, got {kl}")));
    }
    grid.iter()
        .map(|&a| {
            Ok(ApproxRow {
                threshold: a,
                fo_add: add_approx(a, kl, entropy, kappa_bar, AddOrder::FirstOrder),
                ho_add: add_approx(a, kl, entropy, kappa_bar, AddOrder::HigherOrder),
                pfa_corrected: pfa_corrected(a, zeta)?,
            })
        })
        .collect()
}

/// CSV with header `A,fo_add,ho_add,pfa_corrected`.
pub fn write_approx_csv<W: Write>(rows: &[ApproxRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
