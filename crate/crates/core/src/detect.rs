// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection statistics and stopping rules.
//!
//! The statistic is the prior-averaged likelihood ratio
//!
//! ```text
//! G_n = Σ_{k=1}^n π_k exp(Z_n^k) + Π_{n+1},   G_0 = 1
//! ```
//!
//! and `τ_A = min{n ≥ 1 : G_n ≥ A}`. Equivalently `τ_A` stops once the
//! posterior `P(λ ≤ n | F_n) = (G_n - Π_{n+1}) / G_n` exceeds the
//! increasing threshold `1 - Π_{n+1} / A`.
//!
//! Everything is kept in the log domain. The state carries the log of the
//! "signal mass" `S_n = G_n - Π_{n+1}` separately, so the posterior and the
//! one-step recursion never subtract nearly equal numbers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Capability, ChangeModel, ChangePoint, LlrProcess, Observation, ObservationSampler};
use crate::numerics::{log_add_exp, log_sum_exp};
use crate::prior::Prior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// `A = 1/α`; guarantees `P_∞(τ_A < ∞) ≤ α`.
    ConservativeBound,
    /// `A = 1/(ζ α)`; asymptotically `P_∞(τ_A < ∞) ≈ α`.
    OvershootCorrected,
    /// Threshold given directly.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    threshold: f64,
    calibration: Calibration,
}

impl ThresholdPolicy {
    pub fn new(threshold: f64, calibration: Calibration) -> Result<Self> {
        if !(threshold > 1.0) || threshold.is_nan() {
            return Err(Error::invalid("A", format!("threshold must exceed 1, got {threshold}")));
        }
        Ok(Self {
            threshold,
            calibration,
        })
    }

    pub fn explicit(threshold: f64) -> Result<Self> {
        Self::new(threshold, Calibration::Explicit)
    }

    /// `A`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `a = log A`.
    pub fn log_threshold(&self) -> f64 {
        self.threshold.ln()
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }
}

/// Running state of the detector on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    capability: Capability,
    n: usize,
    log_g: f64,
    // log S_n = log(G_n - Π_{n+1}).
    log_signal: f64,
    // log Π_{n+1}.
    log_tail_next: f64,
    stopped_at: Option<usize>,
    per_k_terms: Vec<f64>,
}

impl DetectorState {
    /// Fresh state at `n = 0`: `G_0 = 1`, posterior 0.
    pub fn new(capability: Capability) -> Self {
        Self {
            capability,
            n: 0,
            log_g: 0.0,
            log_signal: f64::NEG_INFINITY,
            log_tail_next: 0.0,
            stopped_at: None,
            per_k_terms: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capability(&self) -> Capability {
        self.capability
    }

    /// `log G_n`.
    pub fn log_g(&self) -> f64 {
        self.log_g
    }

    /// `G_n`; may overflow to `inf` on long post-change runs.
    pub fn g(&self) -> f64 {
        self.log_g.exp()
    }

    /// `log Π_{n+1}`.
    pub fn log_tail_next(&self) -> f64 {
        self.log_tail_next
    }

    /// `P(λ ≤ n | F_n)`.
    pub fn posterior(&self) -> f64 {
        (self.log_signal - self.log_g).exp()
    }

    /// `1 - P(λ ≤ n | F_n) = Π_{n+1} / G_n` without cancellation.
    pub fn posterior_complement(&self) -> f64 {
        (self.log_tail_next - self.log_g).exp()
    }

    pub fn stopped_at(&self) -> Option<usize> {
        self.stopped_at
    }

    /// `log(π_k Λ_n^k)` for `k = 1..=n`, maintained in direct mode.
    pub fn per_k_terms(&self) -> &[f64] {
        &self.per_k_terms
    }

    /// `G_n = (G_{n-1} - Π_{n+1}) e^{ΔZ_n} + Π_{n+1}`, carried as
    /// `log S_n = logaddexp(log S_{n-1}, log π_n) + ΔZ_n`.
    pub fn update_recursive(&mut self, dz: f64, prior: &Prior) -> Result<()> {
        if self.capability != Capability::IncrementStationary {
            return Err(Error::Contract(
                "the one-step recursion requires an increment-stationary LLR source".into(),
            ));
        }
        let n = self.n + 1;
        self.log_signal = log_add_exp(self.log_signal, prior.log_pi(n)) + dz;
        self.finish_step(n, prior);
        Ok(())
    }

    /// Recomputes `G_n` from `Z_n^k` for every `k ≤ n`. The process must
    /// already have absorbed `X_n` for `n = self.n() + 1`.
    pub fn update_direct<P: LlrProcess + ?Sized>(&mut self, process: &P, prior: &Prior) -> Result<()> {
        let n = self.n + 1;
        if process.n() != n {
            return Err(Error::Contract(format!(
                "LLR process is at step {} but the detector expects step {n}",
                process.n()
            )));
        }
        self.per_k_terms.push(0.0);
        for (idx, term) in self.per_k_terms.iter_mut().enumerate() {
            let k = idx + 1;
            let log_pi = prior.log_pi(k);
            *term = if log_pi == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                log_pi + process.llr(k)
            };
        }
        self.log_signal = log_sum_exp(&self.per_k_terms);
        self.finish_step(n, prior);
        Ok(())
    }

    /// Advances one step using the recursion when the source allows it.
    pub fn advance<P: LlrProcess + ?Sized>(&mut self, process: &P, prior: &Prior) -> Result<()> {
        match self.capability {
            Capability::IncrementStationary => {
                let dz = process.increment().ok_or_else(|| {
                    Error::Contract("increment-stationary source did not report ΔZ_n".into())
                })?;
                self.update_recursive(dz, prior)
            }
            Capability::ChangePointDependent => self.update_direct(process, prior),
        }
    }

    fn finish_step(&mut self, n: usize, prior: &Prior) {
        self.n = n;
        self.log_tail_next = prior.log_tail(n + 1);
        self.log_g = log_add_exp(self.log_signal, self.log_tail_next);
    }

    /// Flags `τ_A` on the G-form `G_n ≥ A` (ties stop).
    pub fn check_stop_tau_a(&mut self, policy: &ThresholdPolicy) -> Option<usize> {
        if let Some(stop) = self.stopped_at {
            return Some(stop);
        }
        if self.n >= 1 && crosses_g_form(self, policy) {
            self.stopped_at = Some(self.n);
        }
        self.stopped_at
    }
}

fn crosses_g_form(state: &DetectorState, policy: &ThresholdPolicy) -> bool {
    state.log_g >= policy.log_threshold()
}

/// `P(λ ≤ n | F_n) = (G_n - Π_{n+1}) / G_n`.
pub fn posterior_of(state: &DetectorState) -> f64 {
    state.posterior()
}

/// `1 - Π_{n+1} / A`, the effective posterior threshold of `τ_A` at step `n`.
pub fn posterior_threshold(state: &DetectorState, policy: &ThresholdPolicy) -> f64 {
    1.0 - (state.log_tail_next - policy.log_threshold()).exp()
}

/// Whether `τ_A` stops at the current step, decided by the G-form `G_n ≥ A`.
pub fn stops_g_form(state: &DetectorState, policy: &ThresholdPolicy) -> bool {
    state.n >= 1 && crosses_g_form(state, policy)
}

/// Whether `τ_A` stops at the current step, decided by the posterior form
/// `P(λ ≤ n | F_n) ≥ 1 - Π_{n+1}/A`, compared through the complements
/// `Π_{n+1}/G_n ≤ Π_{n+1}/A`. Agrees with [`stops_g_form`] while
/// `Π_{n+1} > 0`.
pub fn stops_posterior_form(state: &DetectorState, policy: &ThresholdPolicy) -> bool {
    if state.n == 0 {
        return false;
    }
    let gap = state.posterior_complement();
    let allowed = (state.log_tail_next - policy.log_threshold()).exp();
    gap <= allowed
}

/// Shiryaev's rule: stop once the posterior reaches the constant `B ∈ (0, 1)`.
pub fn check_stop_shiryaev(state: &DetectorState, b: f64) -> Result<Option<usize>> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::invalid("B", format!("must lie in (0, 1), got {b}")));
    }
    Ok((state.n >= 1 && state.posterior() >= b).then_some(state.n))
}

/// Feeds observations one at a time through an LLR process and a detector.
pub struct Detector<'a, M: ChangeModel> {
    prior: &'a Prior,
    process: M::Process,
    state: DetectorState,
}

impl<'a, M: ChangeModel> Detector<'a, M> {
    pub fn new(model: &M, prior: &'a Prior) -> Self {
        Self {
            prior,
            process: model.llr_process(),
            state: DetectorState::new(model.capability()),
        }
    }

    /// Forces per-`k` evaluation even for increment-stationary sources.
    pub fn new_direct(model: &M, prior: &'a Prior) -> Self {
        Self {
            prior,
            process: model.llr_process(),
            state: DetectorState::new(Capability::ChangePointDependent),
        }
    }

    pub fn push(&mut self, x: &M::Obs) -> Result<&DetectorState> {
        self.process.observe(x)?;
        self.state.advance(&self.process, self.prior)?;
        Ok(&self.state)
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut DetectorState {
        &mut self.state
    }

    pub fn process(&self) -> &M::Process {
        &self.process
    }
}

/// `ν_k(A) = min{n ≥ k : Z_n^k ≥ log(A / π_k)}` on a recorded trajectory,
/// `None` if the trajectory ends first.
pub fn dominating_time<M: ChangeModel>(
    model: &M,
    observations: &[M::Obs],
    prior: &Prior,
    k: usize,
    threshold: f64,
) -> Result<Option<usize>> {
    let level = dominating_level(prior, k, threshold)?;
    let mut process = model.llr_process();
    for (idx, x) in observations.iter().enumerate() {
        process.observe(x)?;
        let n = idx + 1;
        if n >= k && process.llr(k) >= level {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// `log(A / π_k)`.
pub fn dominating_level(prior: &Prior, k: usize, threshold: f64) -> Result<f64> {
    if !(threshold > 1.0) {
        return Err(Error::invalid("A", format!("threshold must exceed 1, got {threshold}")));
    }
    let pi = prior.pi(k)?;
    if pi <= 0.0 {
        return Err(Error::invalid("k", format!("π_{k} = 0; ν_k(A) is undefined")));
    }
    Ok(threshold.ln() - prior.log_pi(k))
}

/// Outcome of the one-sided test `η_b = min{n ≥ 1 : Z_n^1 ≥ b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneSidedOutcome {
    Crossed { step: usize, overshoot: f64 },
    Censored { horizon: usize },
}

/// Runs `η_b` on a freshly drawn trajectory under `P_1`.
pub fn one_sided_test<M: ChangeModel, R: rand::Rng + ?Sized>(
    model: &M,
    b: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<OneSidedOutcome> {
    if !(b > 0.0) {
        return Err(Error::invalid("b", format!("must be positive, got {b}")));
    }
    let mut sampler = model.sampler(ChangePoint::At(1));
    let mut process = model.llr_process();
    for n in 1..=horizon {
        let x = sampler.draw(rng);
        process.observe(&x)?;
        let z = process.llr(1);
        if z >= b {
            return Ok(OneSidedOutcome::Crossed {
                step: n,
                overshoot: z - b,
            });
        }
    }
    Ok(OneSidedOutcome::Censored { horizon })
}

/// One row of a step-by-step trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub x: String,
    pub g: f64,
    pub posterior: f64,
    pub threshold: f64,
    pub stopped: bool,
}

/// Runs `τ_A` over `observations`, recording one row per step. The trace ends
/// at the stopping step.
pub fn trace<M: ChangeModel>(
    model: &M,
    prior: &Prior,
    policy: &ThresholdPolicy,
    observations: &[M::Obs],
) -> Result<Vec<TraceRow>> {
    let mut detector = Detector::new(model, prior);
    let mut rows = Vec::new();
    for x in observations {
        detector.push(x)?;
        let stop = detector.state_mut().check_stop_tau_a(policy);
        let state = detector.state();
        rows.push(TraceRow {
            n: state.n(),
            x: x.to_csv_field(),
            g: state.g(),
            posterior: state.posterior(),
            threshold: posterior_threshold(state, policy),
            stopped: stop.is_some(),
        });
        if stop.is_some() {
            break;
        }
    }
    Ok(rows)
}

/// Writes trace rows as CSV with header `n,x,g,posterior,threshold,stopped`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DeterministicDrift, ExpModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometric(rho: f64) -> Prior {
        Prior::geometric(rho).unwrap()
    }

    #[test]
    fn zero_increment_keeps_unit_mass() {
        let prior = geometric(0.3);
        let mut s = DetectorState::new(Capability::IncrementStationary);
        assert_eq!(s.g(), 1.0);
        assert_eq!(s.posterior(), 0.0);
        for _ in 0..50 {
            s.update_recursive(0.0, &prior).unwrap();
            assert!((s.g() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recursion_hand_value() {
        let prior = geometric(0.5);
        let mut s = DetectorState::new(Capability::IncrementStationary);
        s.update_recursive(2f64.ln(), &prior).unwrap();
        assert!((s.g() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn recursion_rejected_for_dependent_sources() {
        let prior = geometric(0.5);
        let mut s = DetectorState::new(Capability::ChangePointDependent);
        assert!(matches!(s.update_recursive(0.1, &prior), Err(Error::Contract(_))));
    }

    struct FixedLlr {
        n: usize,
        values: Vec<f64>,
    }

    impl LlrProcess for FixedLlr {
        type Obs = f64;
        fn n(&self) -> usize {
            self.n
        }
        fn observe(&mut self, _x: &f64) -> Result<()> {
            self.n += 1;
            Ok(())
        }
        fn increment(&self) -> Option<f64> {
            None
        }
        fn llr(&self, k: usize) -> f64 {
            self.values[k - 1]
        }
    }

    #[test]
    fn direct_hand_value_and_posterior() {
        let prior = geometric(0.5);
        let mut s = DetectorState::new(Capability::ChangePointDependent);
        let mut p = FixedLlr { n: 0, values: vec![0.0] };
        p.observe(&0.0).unwrap();
        s.update_direct(&p, &prior).unwrap();
        assert!((s.g() - 1.0).abs() < 1e-15);
        p.values = vec![4f64.ln(), 2f64.ln()];
        p.observe(&0.0).unwrap();
        s.update_direct(&p, &prior).unwrap();
        assert!((s.g() - 2.75).abs() < 1e-14);
        assert!((s.posterior() - 2.5 / 2.75).abs() < 1e-14);
        assert_eq!(check_stop_shiryaev(&s, 0.9).unwrap(), Some(2));
        assert_eq!(check_stop_shiryaev(&s, 0.95).unwrap(), None);
        assert!(check_stop_shiryaev(&s, 1.0).is_err());
        assert!(check_stop_shiryaev(&s, 0.0).is_err());
        // Out-of-step process.
        assert!(s.update_direct(&p, &prior).is_err());
    }

    #[test]
    fn initial_posterior_is_zero() {
        let s = DetectorState::new(Capability::IncrementStationary);
        assert_eq!(posterior_of(&s), 0.0);
        let prior = geometric(0.5);
        let mut z = DetectorState::new(Capability::IncrementStationary);
        // Vanishing likelihood ratios: G_n → Π_{n+1}, posterior → 0.
        z.update_recursive(-800.0, &prior).unwrap();
        assert!(z.posterior() < 1e-300);
    }

    #[test]
    fn threshold_just_above_one_stops_immediately() {
        let prior = geometric(0.2);
        let policy = ThresholdPolicy::explicit(1.0 + 1e-9).unwrap();
        let mut s = DetectorState::new(Capability::IncrementStationary);
        s.update_recursive(0.01, &prior).unwrap();
        assert_eq!(s.check_stop_tau_a(&policy), Some(1));
        assert!(stops_posterior_form(&s, &policy));
    }

    #[test]
    fn ties_stop() {
        // Tabulated [1.0]: G_n = exp(Z_n^1) after step 1.
        let prior = Prior::tabulated(&[1.0]).unwrap();
        let policy = ThresholdPolicy::explicit(2f64.exp()).unwrap();
        let mut s = DetectorState::new(Capability::IncrementStationary);
        s.update_recursive(1.0, &prior).unwrap();
        assert_eq!(s.check_stop_tau_a(&policy), None);
        s.update_recursive(1.0, &prior).unwrap();
        assert_eq!(s.log_g(), 2.0);
        assert_eq!(s.check_stop_tau_a(&policy), Some(2));
    }

    #[test]
    fn invalid_thresholds() {
        assert!(ThresholdPolicy::explicit(1.0).is_err());
        assert!(ThresholdPolicy::explicit(f64::NAN).is_err());
        assert!(ThresholdPolicy::explicit(0.5).is_err());
    }

    #[test]
    fn huge_threshold_does_not_stop_early_under_no_change() {
        let model = ExpModel::new(1.0).unwrap();
        let prior = geometric(0.1);
        let policy = ThresholdPolicy::explicit(1e6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let xs = model.sample_trajectory(ChangePoint::Never, 10, &mut rng);
            let rows = trace(&model, &prior, &policy, &xs).unwrap();
            assert_eq!(rows.len(), 10);
            assert!(rows.iter().all(|r| !r.stopped));
        }
    }

    #[test]
    fn dominating_time_deterministic_and_level() {
        let prior = geometric(0.5);
        let level = dominating_level(&prior, 1, 100.0).unwrap();
        assert!((level - 200f64.ln()).abs() < 1e-14);
        assert!((level - 5.2983).abs() < 1e-4);
        let model = DeterministicDrift::new(0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in [1usize, 3, 8] {
            let xs = model.sample_trajectory(ChangePoint::At(k), 200, &mut rng);
            let a = 1e3;
            let nu = dominating_time(&model, &xs, &prior, k, a).unwrap().unwrap();
            let lvl = dominating_level(&prior, k, a).unwrap();
            assert_eq!(nu - k + 1, (lvl / 0.7).ceil() as usize);
        }
        let tab = Prior::tabulated(&[0.5, 0.0, 0.5]).unwrap();
        assert!(dominating_level(&tab, 2, 10.0).is_err());
        assert!(dominating_level(&tab, 1, 1.0).is_err());
    }

    #[test]
    fn one_sided_deterministic_overshoot() {
        let model = DeterministicDrift::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = one_sided_test(&model, 2.5, 100, &mut rng).unwrap();
        assert_eq!(out, OneSidedOutcome::Crossed { step: 3, overshoot: 0.5 });
        let censored = one_sided_test(&model, 50.0, 10, &mut rng).unwrap();
        assert_eq!(censored, OneSidedOutcome::Censored { horizon: 10 });
        assert!(one_sided_test(&model, 0.0, 10, &mut rng).is_err());
    }

    #[test]
    fn trace_stops_once_and_flags_last_row() {
        let model = ExpModel::new(2.0).unwrap();
        let prior = geometric(0.2);
        let policy = ThresholdPolicy::explicit(100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs = model.sample_trajectory(ChangePoint::At(1), 500, &mut rng);
        let rows = trace(&model, &prior, &policy, &xs).unwrap();
        let last = rows.last().unwrap();
        assert!(last.stopped && last.g >= 100.0);
        assert!(rows[..rows.len() - 1].iter().all(|r| !r.stopped && r.g < 100.0));
        // The effective posterior threshold increases with n.
        assert!(rows.windows(2).all(|w| w[1].threshold >= w[0].threshold));
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,x,g,posterior,threshold,stopped\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
