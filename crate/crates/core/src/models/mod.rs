// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observation models and their log-likelihood ratio processes.
//!
//! A [`ChangeModel`] produces two per-trajectory objects: an
//! [`ObservationSampler`] that draws `X_1, X_2, ...` under `P_k` or `P_∞`,
//! and an [`LlrProcess`] that consumes the same observations and answers
//! `Z_n^k = log Λ_n^k` for every hypothesized change point `k ≤ n`.
//!
//! Sources whose increments `ΔZ_n` do not depend on `k` advertise
//! [`Capability::IncrementStationary`] and admit the one-step recursion for
//! the detection statistic; all others must be evaluated per change point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod ar;
mod drift;
mod exponential;
mod mixture;
mod state_space;

pub use ar::{ArModel, ArProcess, ArSampler};
pub use drift::{DeterministicDrift, DriftProcess, DriftSampler};
pub use exponential::{ExpModel, ExpProcess, ExpSampler};
pub use mixture::{Density, MixtureModel, MixtureProcess, MixtureSampler};
pub use state_space::{Innovation, KalmanFilter, StateSpaceModel, StateSpaceProcess, StateSpaceSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    /// `ΔZ_n` depends only on the data, so `Z_n^k = Σ_{i=k}^n ΔZ_i`.
    IncrementStationary,
    /// `Z_n^k` must be answered separately for each `k`.
    ChangePointDependent,
}

/// Where the change happens in a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangePoint {
    At(usize),
    Never,
}

impl ChangePoint {
    /// Whether observation `n` (1-based) is drawn from the post-change law.
    #[inline]
    pub fn is_post_change(self, n: usize) -> bool {
        match self {
            ChangePoint::At(k) => n >= k,
            ChangePoint::Never => false,
        }
    }

    pub fn index(self) -> Option<usize> {
        match self {
            ChangePoint::At(k) => Some(k),
            ChangePoint::Never => None,
        }
    }
}

/// A single observation that can be written into a CSV cell.
pub trait Observation: Clone + Send + Sync + std::fmt::Debug {
    fn to_csv_field(&self) -> String;
}

impl Observation for f64 {
    fn to_csv_field(&self) -> String {
        format!("{self}")
    }
}

impl Observation for nalgebra::DVector<f64> {
    fn to_csv_field(&self) -> String {
        self.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
    }
}

/// Draws the observations of one trajectory in order.
pub trait ObservationSampler: Send {
    type Obs: Observation;

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Self::Obs;
}

/// Running log-likelihood ratios for one trajectory.
pub trait LlrProcess: Send {
    type Obs: Observation;

    /// Number of observations absorbed so far.
    fn n(&self) -> usize;

    /// Absorbs `X_{n+1}`.
    fn observe(&mut self, x: &Self::Obs) -> Result<()>;

    /// `ΔZ_n` for increment-stationary sources, `None` otherwise.
    fn increment(&self) -> Option<f64>;

    /// `Z_n^k` for `1 ≤ k ≤ n`. Callers must respect the range.
    fn llr(&self, k: usize) -> f64;

    /// `Z_n^k` with the range checked.
    fn llr_checked(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.n() {
            return Err(Error::OutOfRange {
                index: k,
                reason: format!("Z_n^k requires 1 <= k <= n = {}", self.n()),
            });
        }
        Ok(self.llr(k))
    }
}

/// A pre-/post-change observation model.
pub trait ChangeModel: Send + Sync {
    type Obs: Observation;
    type Sampler: ObservationSampler<Obs = Self::Obs>;
    type Process: LlrProcess<Obs = Self::Obs>;

    fn name(&self) -> &'static str;

    fn capability(&self) -> Capability;

    /// Asymptotic drift `q` of `Z_{k+n-1}^k / n` under `P_k`; the
    /// Kullback-Leibler number in the i.i.d. case.
    fn kl_number(&self) -> f64;

    /// Whether the LLR increments are nonarithmetic under `P_1`. Declared per
    /// model; renewal-theoretic limits assume it.
    fn nonarithmetic(&self) -> bool {
        true
    }

    fn sampler(&self, change: ChangePoint) -> Self::Sampler;

    fn llr_process(&self) -> Self::Process;

    /// `X_1..X_{n_max}` under `P_k` (or `P_∞`).
    fn sample_trajectory<R: Rng + ?Sized>(&self, change: ChangePoint, n_max: usize, rng: &mut R) -> Vec<Self::Obs> {
        let mut sampler = self.sampler(change);
        (0..n_max).map(|_| sampler.draw(rng)).collect()
    }

    /// Feeds a whole trajectory through a fresh LLR process.
    fn process_trajectory(&self, observations: &[Self::Obs]) -> Result<Self::Process> {
        let mut process = self.llr_process();
        for x in observations {
            process.observe(x)?;
        }
        Ok(process)
    }
}

/// Prefix sums `C_0 = 0, C_n = Σ_{i≤n} s_i` used by several processes.
#[derive(Debug, Clone)]
pub(crate) struct PrefixSums {
    sums: Vec<f64>,
}

impl Default for PrefixSums {
    fn default() -> Self {
        Self { sums: vec![0.0] }
    }
}

impl PrefixSums {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        let last = *self.sums.last().unwrap();
        self.sums.push(last + x);
    }

    /// `Σ_{i=from}^{to} s_i`, empty when `from > to`.
    #[inline]
    pub(crate) fn range(&self, from: usize, to: usize) -> f64 {
        if from > to {
            0.0
        } else {
            self.sums[to] - self.sums[from - 1]
        }
    }

    #[inline]
    pub(crate) fn len(&self) -> usize {
        self.sums.len() - 1
    }

    #[inline]
    pub(crate) fn last_increment(&self) -> Option<f64> {
        let n = self.len();
        (n > 0).then(|| self.sums[n] - self.sums[n - 1])
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}
