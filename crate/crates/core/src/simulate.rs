// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo campaigns.
//!
//! Trials are independent and keyed by `(seed, trial index)`, so a campaign
//! is reproducible bit for bit regardless of how rayon schedules the work:
//! per-trial records are collected in trial order and reduced sequentially
//! with compensated sums.
//!
//! No-change (PFA) trials may be *settled* before the horizon: under `P_∞`
//! the statistic `G_n` is a nonnegative martingale, so
//! `P_∞(sup_{m ≥ n} G_m ≥ A | F_n) ≤ G_n / A`. Once `G_n ≤ ε A` the trial
//! can raise a future false alarm with probability at most `ε`, and it is
//! recorded as censored (flagged `settled`). With the default `ε = 1e-12`
//! the induced bias of a PFA estimate is below `1e-12`.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{check_stop_shiryaev, dominating_level, Detector, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::models::{ChangeModel, ChangePoint, LlrProcess, ObservationSampler};
use crate::numerics::{least_squares, mean_and_se, median};
use crate::prior::Prior;
use crate::rng::{trial_rng, Stream, TrialRng};

/// Default `ε` for settling no-change trials.
pub const DEFAULT_SETTLE_RATIO: f64 = 1e-12;
/// Largest prior mass beyond the horizon tolerated when drawing `λ ~ π`.
pub const MAX_TRUNCATED_PRIOR_MASS: f64 = 1e-6;
/// Minimum number of effective trials for a delay estimate.
pub const MIN_EFFECTIVE_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangePointMode {
    /// `λ ~ π`, redrawn while `λ` exceeds the horizon.
    FromPrior,
    Fixed(usize),
    NoChange,
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// `None` means no change (`λ = ∞`).
    pub change_point: Option<usize>,
    /// `τ_A`, `None` when censored.
    pub stop_step: Option<usize>,
    /// Step at which an unstopped trial ended.
    pub censored_at: Option<usize>,
    /// Censored early by the martingale bound rather than by the horizon.
    pub settled: bool,
    /// `(τ_A - λ)⁺` when stopped and `λ` finite.
    pub delay: Option<usize>,
    /// `τ_A < λ`.
    pub false_alarm: bool,
    /// Prior draws rejected because they fell beyond the horizon.
    pub rejected_draws: u32,
    /// `ν_λ(A)` if it occurred no later than the last simulated step.
    pub dominating_step: Option<usize>,
    /// Shiryaev stopping step, when requested.
    pub shiryaev_stop: Option<usize>,
}

impl TrialRecord {
    pub fn stopped(&self) -> bool {
        self.stop_step.is_some()
    }

    /// `τ_A ≤ ν_λ(A)` as far as the simulated path shows.
    pub fn domination_holds(&self) -> bool {
        match (self.stop_step, self.dominating_step) {
            (Some(stop), Some(nu)) => stop <= nu,
            (None, Some(_)) => false,
            _ => true,
        }
    }
}

/// Per-trial knobs beyond the detector itself.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialOptions {
    /// Settle no-change trials once `G_n ≤ ε A` (ignored unless `λ = ∞`).
    pub settle_ratio: Option<f64>,
    /// Also run Shiryaev's rule with this constant threshold.
    pub shiryaev_threshold: Option<f64>,
    /// Evaluate `G_n` by the per-`k` sum even when the recursion applies.
    pub force_direct: bool,
}

fn draw_change_point(prior: &Prior, mode: ChangePointMode, horizon: usize, seed: u64, trial: u64) -> Result<(ChangePoint, u32)> {
    match mode {
        ChangePointMode::NoChange => Ok((ChangePoint::Never, 0)),
        ChangePointMode::Fixed(0) => Err(Error::invalid("k", "fixed change point must be at least 1")),
        ChangePointMode::Fixed(k) => Ok((ChangePoint::At(k), 0)),
        ChangePointMode::FromPrior => {
            let beyond = prior.tail(horizon + 1);
            if beyond > MAX_TRUNCATED_PRIOR_MASS {
                return Err(Error::Config(format!(
                    "horizon {horizon} leaves prior mass {beyond:.3e} beyond it (limit {MAX_TRUNCATED_PRIOR_MASS:e})"
                )));
            }
            let mut rng = trial_rng(seed, trial, Stream::ChangePoint);
            let mut rejected = 0u32;
            loop {
                let k = prior.sample(&mut rng);
                if k <= horizon {
                    return Ok((ChangePoint::At(k), rejected));
                }
                rejected += 1;
            }
        }
    }
}

/// Simulates one trajectory and runs `τ_A` on it.
pub fn run_trial<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    mode: ChangePointMode,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Result<TrialRecord> {
    run_trial_with(model, prior, policy, mode, horizon, seed, trial, TrialOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn run_trial_with<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    mode: ChangePointMode,
    horizon: usize,
    seed: u64,
    trial: u64,
    options: TrialOptions,
) -> Result<TrialRecord> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let (change, rejected_draws) = draw_change_point(prior, mode, horizon, seed, trial)?;
    let mut rng: TrialRng = trial_rng(seed, trial, Stream::Observations);
    run_path(model, prior, policy, change, horizon, &mut rng, options).map(|mut rec| {
        rec.trial = trial;
        rec.rejected_draws = rejected_draws;
        rec
    })
}

fn run_path<M: ChangeModel, R: Rng + ?Sized>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    change: ChangePoint,
    horizon: usize,
    rng: &mut R,
    options: TrialOptions,
) -> Result<TrialRecord> {
    let mut sampler = model.sampler(change);
    let mut detector = if options.force_direct {
        Detector::new_direct(model, prior)
    } else {
        Detector::new(model, prior)
    };
    let domination = match change {
        ChangePoint::At(k) if prior.log_pi(k) > f64::NEG_INFINITY => Some((k, dominating_level(prior, k, policy.threshold())?)),
        _ => None,
    };
    let settle_log = match (change, options.settle_ratio) {
        (ChangePoint::Never, Some(eps)) => Some(policy.log_threshold() + eps.ln()),
        _ => None,
    };

    let mut stop_step = None;
    let mut shiryaev_stop = None;
    let mut dominating_step = None;
    let mut settled = false;
    let mut last = 0;
    for n in 1..=horizon {
        let x = sampler.draw(rng);
        detector.push(&x)?;
        last = n;
        if stop_step.is_none() {
            stop_step = detector.state_mut().check_stop_tau_a(policy);
            if let Some((k, level)) = domination {
                if n >= k && dominating_step.is_none() && detector.process().llr(k) >= level {
                    dominating_step = Some(n);
                }
            }
        }
        if let (Some(b), None) = (options.shiryaev_threshold, shiryaev_stop) {
            shiryaev_stop = check_stop_shiryaev(detector.state(), b)?;
        }
        let shiryaev_done = options.shiryaev_threshold.is_none() || shiryaev_stop.is_some();
        if stop_step.is_some() && shiryaev_done {
            break;
        }
        if let Some(level) = settle_log {
            if detector.state().log_g() <= level && stop_step.is_none() && shiryaev_done {
                settled = true;
                break;
            }
        }
    }

    let k = change.index();
    let delay = match (stop_step, k) {
        (Some(t), Some(k)) => Some(t.saturating_sub(k)),
        _ => None,
    };
    let false_alarm = match (stop_step, k) {
        (Some(t), Some(k)) => t < k,
        (Some(_), None) => true,
        _ => false,
    };
    Ok(TrialRecord {
        trial: 0,
        change_point: k,
        stop_step,
        censored_at: stop_step.is_none().then_some(last),
        settled,
        delay,
        false_alarm,
        rejected_draws: 0,
        dominating_step,
        shiryaev_stop,
    })
}

/// Runs trials `0..n_trials` in parallel and returns them in trial order.
#[allow(clippy::too_many_arguments)]
pub fn run_trials<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    mode: ChangePointMode,
    horizon: usize,
    n_trials: usize,
    seed: u64,
    options: TrialOptions,
) -> Result<Vec<TrialRecord>> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| run_trial_with(model, prior, policy, mode, horizon, seed, trial, options))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `P_∞(τ_A ≤ horizon)`, a lower bound on `P_∞(τ_A < ∞)`.
    PfaGlobal,
    /// `E^π(τ - λ | τ ≥ λ)`.
    Add,
    /// `E^π[(τ - λ)^m | τ ≥ λ]`.
    Dm(u32),
    /// `E^π[((τ - λ)⁺)^m]`.
    DmUnconditional(u32),
    /// `E_k(τ - k | τ ≥ k)`.
    CondAdd(usize),
    StopRate,
    /// `P^π(τ < λ)`.
    FalseAlarmRate,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::PfaGlobal => write!(f, "pfa_global"),
            Metric::Add => write!(f, "add"),
            Metric::Dm(m) => write!(f, "d{m}"),
            Metric::DmUnconditional(m) => write!(f, "d{m}_unconditional"),
            Metric::CondAdd(k) => write!(f, "cond_add_k{k}"),
            Metric::StopRate => write!(f, "stop_rate"),
            Metric::FalseAlarmRate => write!(f, "false_alarm_rate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    TauA,
    Shiryaev,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::TauA => write!(f, "tau_a"),
            Rule::Shiryaev => write!(f, "shiryaev"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub metric: Metric,
    #[serde(default)]
    pub rule: Rule,
    pub value: f64,
    pub stderr: f64,
    pub n_trials: usize,
    /// Trials that entered the average.
    pub effective_trials: usize,
    pub horizon: usize,
    pub censored_count: usize,
}

fn proportion(metric: Metric, hits: usize, n_trials: usize, horizon: usize, censored: usize) -> EstimateSummary {
    let p = hits as f64 / n_trials as f64;
    EstimateSummary {
        metric,
        rule: Rule::TauA,
        value: p,
        stderr: (p * (1.0 - p) / n_trials as f64).sqrt(),
        n_trials,
        effective_trials: n_trials,
        horizon,
        censored_count: censored,
    }
}

fn average(metric: Metric, values: &[f64], n_trials: usize, horizon: usize, censored: usize) -> EstimateSummary {
    let (value, stderr) = mean_and_se(values);
    EstimateSummary {
        metric,
        rule: Rule::TauA,
        value,
        stderr,
        n_trials,
        effective_trials: values.len(),
        horizon,
        censored_count: censored,
    }
}

/// `ceil(200 log A / q)`.
pub fn default_pfa_horizon(policy: &ThresholdPolicy, q: f64) -> usize {
    (200.0 * policy.log_threshold() / q).ceil().max(1.0) as usize
}

/// Horizon for post-change campaigns: covers all but `1e-7` of the prior
/// mass plus twenty times the first-order delay scale.
pub fn default_delay_horizon(prior: &Prior, policy: &ThresholdPolicy, q: f64) -> usize {
    let mut reach = 1;
    while prior.tail(reach + 1) > 1e-7 && reach < 10_000_000 {
        reach += 1;
    }
    let delay = 20.0 * (policy.log_threshold() + prior.entropy_constant() + 1.0) / q;
    reach + delay.ceil() as usize
}

/// Aggregated PFA campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfaEstimate {
    pub summary: EstimateSummary,
    pub alarms: usize,
    pub settled: usize,
}

/// Estimates `P_∞(τ_A ≤ horizon)` with the default settle ratio.
pub fn estimate_pfa_global<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    horizon: usize,
    n_trials: usize,
    seed: u64,
) -> Result<PfaEstimate> {
    estimate_pfa_global_with(model, prior, policy, horizon, n_trials, seed, Some(DEFAULT_SETTLE_RATIO))
}

pub fn estimate_pfa_global_with<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    horizon: usize,
    n_trials: usize,
    seed: u64,
    settle_ratio: Option<f64>,
) -> Result<PfaEstimate> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be positive"));
    }
    let options = TrialOptions {
        settle_ratio,
        ..TrialOptions::default()
    };
    let records = run_trials(model, prior, policy, ChangePointMode::NoChange, horizon, n_trials, seed, options)?;
    let alarms = records.iter().filter(|r| r.stopped()).count();
    let settled = records.iter().filter(|r| r.settled).count();
    Ok(PfaEstimate {
        summary: proportion(Metric::PfaGlobal, alarms, n_trials, horizon, n_trials - alarms),
        alarms,
        settled,
    })
}

/// Delay statistics of a post-change campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub summaries: Vec<EstimateSummary>,
    pub false_alarms: usize,
    pub censored_post_change: usize,
    pub rejected_draws: u64,
    pub domination_violations: usize,
}

impl DelayReport {
    pub fn metric(&self, metric: Metric) -> Option<&EstimateSummary> {
        self.summaries.iter().find(|s| s.metric == metric)
    }
}

fn delay_metric(m: u32) -> Metric {
    if m == 1 {
        Metric::Add
    } else {
        Metric::Dm(m)
    }
}

/// Summarizes delay moments over records. Conditional moments average over
/// stopped trials with `τ ≥ λ`; censored trials are excluded and counted.
pub fn summarize_delays(records: &[TrialRecord], m_list: &[u32], horizon: usize) -> Result<DelayReport> {
    let n_trials = records.len();
    let stopped: Vec<&TrialRecord> = records.iter().filter(|r| r.stopped()).collect();
    let censored = n_trials - stopped.len();
    let detections: Vec<f64> = stopped
        .iter()
        .filter(|r| !r.false_alarm)
        .filter_map(|r| r.delay.map(|d| d as f64))
        .collect();
    if detections.len() < MIN_EFFECTIVE_TRIALS {
        return Err(Error::InsufficientTrials {
            metric: "delay moments".into(),
            effective: detections.len(),
            required: MIN_EFFECTIVE_TRIALS,
        });
    }
    let positive_part: Vec<f64> = stopped.iter().map(|r| r.delay.unwrap_or(0) as f64).collect();
    let mut summaries = Vec::new();
    for &m in m_list {
        if m == 0 {
            return Err(Error::invalid("m_list", "moment orders must be positive"));
        }
        let powered: Vec<f64> = detections.iter().map(|d| d.powi(m as i32)).collect();
        summaries.push(average(delay_metric(m), &powered, n_trials, horizon, censored));
        let unconditional: Vec<f64> = positive_part.iter().map(|d| d.powi(m as i32)).collect();
        summaries.push(average(Metric::DmUnconditional(m), &unconditional, n_trials, horizon, censored));
    }
    let false_alarms = stopped.iter().filter(|r| r.false_alarm).count();
    summaries.push(proportion(Metric::FalseAlarmRate, false_alarms, n_trials, horizon, censored));
    summaries.push(proportion(Metric::StopRate, stopped.len(), n_trials, horizon, censored));
    Ok(DelayReport {
        summaries,
        false_alarms,
        censored_post_change: censored,
        rejected_draws: records.iter().map(|r| r.rejected_draws as u64).sum(),
        domination_violations: records.iter().filter(|r| !r.domination_holds()).count(),
    })
}

/// `D_m^π(τ_A)` for each `m` in `m_list` under `λ ~ π`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_delay_moments<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    m_list: &[u32],
    horizon: usize,
    n_trials: usize,
    seed: u64,
) -> Result<DelayReport> {
    let records = run_trials(model, prior, policy, ChangePointMode::FromPrior, horizon, n_trials, seed, TrialOptions::default())?;
    summarize_delays(&records, m_list, horizon)
}

/// `E_k(τ_A - k | τ_A ≥ k)` for each `k`. Every `k` reuses the same trial
/// streams, so differences between change points see common noise.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cond_add<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    k_list: &[usize],
    horizon: usize,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<EstimateSummary>> {
    k_list
        .iter()
        .map(|&k| {
            let records = run_trials(model, prior, policy, ChangePointMode::Fixed(k), horizon, n_trials, seed, TrialOptions::default())?;
            let report = summarize_delays(&records, &[1], horizon).map_err(|err| match err {
                Error::InsufficientTrials { effective, required, .. } => Error::InsufficientTrials {
                    metric: Metric::CondAdd(k).to_string(),
                    effective,
                    required,
                },
                other => other,
            })?;
            let mut summary = report.metric(Metric::Add).cloned().expect("m = 1 requested");
            summary.metric = Metric::CondAdd(k);
            Ok(summary)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    #[serde(rename = "A")]
    pub threshold: f64,
    pub add: f64,
    pub stderr: f64,
    /// Median of `(τ_A - λ)⁺ / log A` over detections.
    pub median_ratio: f64,
    pub effective_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub points: Vec<SlopePoint>,
    /// Least-squares slope of ADD against `log A`.
    pub slope: f64,
    pub intercept: f64,
    /// `1/q`.
    pub target: f64,
    /// `slope · q - 1`.
    pub relative_deviation: f64,
}

/// Regresses ADD on `log A` over `grid`.
pub fn slope_study<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    grid: &[f64],
    horizon: Option<usize>,
    n_trials: usize,
    seed: u64,
) -> Result<SlopeReport> {
    if grid.len() < 3 {
        return Err(Error::invalid("A_grid", "needs at least three thresholds"));
    }
    let (lo, hi) = grid.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    if !(hi / lo >= 100.0) {
        return Err(Error::invalid("A_grid", "thresholds must span at least two decades"));
    }
    let q = model.kl_number();
    let mut points = Vec::with_capacity(grid.len());
    for &a in grid {
        let policy = ThresholdPolicy::explicit(a)?;
        let horizon = horizon.unwrap_or_else(|| default_delay_horizon(prior, &policy, q));
        let records = run_trials(model, prior, &policy, ChangePointMode::FromPrior, horizon, n_trials, seed, TrialOptions::default())?;
        let report = summarize_delays(&records, &[1], horizon)?;
        let add = report.metric(Metric::Add).expect("m = 1 requested");
        let ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.stopped() && !r.false_alarm)
            .filter_map(|r| r.delay)
            .map(|d| d as f64 / policy.log_threshold())
            .collect();
        points.push(SlopePoint {
            threshold: a,
            add: add.value,
            stderr: add.stderr,
            median_ratio: median(&ratios),
            effective_trials: add.effective_trials,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.threshold.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.add).collect();
    let (slope, intercept) = least_squares(&x, &y);
    Ok(SlopeReport {
        points,
        slope,
        intercept,
        target: 1.0 / q,
        relative_deviation: slope * q - 1.0,
    })
}

/// `τ_A` and Shiryaev's `ν_B` on shared trajectories with `λ ~ π`.
#[allow(clippy::too_many_arguments)]
pub fn compare_rules<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    shiryaev_threshold: f64,
    horizon: usize,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<EstimateSummary>> {
    if !(shiryaev_threshold > 0.0 && shiryaev_threshold < 1.0) {
        return Err(Error::invalid("B", format!("must lie in (0, 1), got {shiryaev_threshold}")));
    }
    let options = TrialOptions {
        shiryaev_threshold: Some(shiryaev_threshold),
        ..TrialOptions::default()
    };
    let records = run_trials(model, prior, policy, ChangePointMode::FromPrior, horizon, n_trials, seed, options)?;
    let mut summaries = summarize_delays(&records, &[1], horizon)?.summaries;
    let as_shiryaev: Vec<TrialRecord> = records
        .iter()
        .map(|r| {
            let k = r.change_point.expect("prior draws are finite");
            TrialRecord {
                stop_step: r.shiryaev_stop,
                censored_at: r.shiryaev_stop.is_none().then_some(horizon),
                delay: r.shiryaev_stop.map(|t| t.saturating_sub(k)),
                false_alarm: r.shiryaev_stop.is_some_and(|t| t < k),
                dominating_step: None,
                ..r.clone()
            }
        })
        .collect();
    let mut shiryaev = summarize_delays(&as_shiryaev, &[1], horizon)?.summaries;
    for s in &mut shiryaev {
        s.rule = Rule::Shiryaev;
    }
    summaries.append(&mut shiryaev);
    Ok(summaries)
}

/// Identifies the configuration and code that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign: String,
    pub provenance: Provenance,
    pub summaries: Vec<EstimateSummary>,
    /// Free-form diagnostics (censoring, settling, rejected prior draws).
    pub diagnostics: serde_json::Value,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    metric: String,
    rule: String,
    value: f64,
    stderr: f64,
    n_trials: usize,
    effective_trials: usize,
    horizon: usize,
    censored_count: usize,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
}

impl CampaignReport {
    /// One row per metric.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.summaries {
            wtr.serialize(SummaryRow {
                metric: s.metric.to_string(),
                rule: s.rule.to_string(),
                value: s.value,
                stderr: s.stderr,
                n_trials: s.n_trials,
                effective_trials: s.effective_trials,
                horizon: s.horizon,
                censored_count: s.censored_count,
                config_hash: &self.provenance.config_hash,
                seed: self.provenance.seed,
                version: &self.provenance.version,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}
