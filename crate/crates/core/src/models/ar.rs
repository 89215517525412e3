// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_positive, Capability, ChangeModel, ChangePoint, LlrProcess, ObservationSampler, PrefixSums};
use crate::error::{Error, Result};

/// Mean shift `θ` appearing at the change point in a zero-mean stable Gaussian
/// AR(p) noise `V_n = Σ_j δ_j V_{n-j} + ξ_n`, `ξ_n ~ N(0, σ²)`, `V_j = 0`
/// for `j ≤ 0`.
///
/// The LLR is evaluated exactly through the whitened innovations
/// `X̃_i = X_i - Σ_{j=1}^{min(p, i-1)} δ_j X_{i-j}` and the change signature
/// `θ̃_i(k) = θ (1 - Σ_{j=1}^{min(i-k, p)} δ_j)`, which depends on `i - k`
/// during the first `p` post-change steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    theta: f64,
    sigma: f64,
    deltas: Vec<f64>,
    // profile[j] = θ̃ at offset j = i - k, for j = 0..=p (the last entry is stationary).
    profile: Vec<f64>,
}

impl ArModel {
    pub fn new(theta: f64, sigma: f64, deltas: Vec<f64>) -> Result<Self> {
        if !(theta.is_finite() && theta != 0.0) {
            return Err(Error::invalid("theta", format!("must be finite and nonzero, got {theta}")));
        }
        check_positive("sigma", sigma)?;
        if deltas.is_empty() {
            return Err(Error::invalid("deltas", "at least one AR coefficient is required"));
        }
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("deltas", "coefficients must be finite"));
        }
        let radius = companion_spectral_radius(&deltas);
        if radius >= 1.0 {
            return Err(Error::invalid(
                "deltas",
                format!("AR polynomial has a root on or inside the unit circle (companion spectral radius {radius:.6})"),
            ));
        }
        let p = deltas.len();
        let mut profile = Vec::with_capacity(p + 1);
        let mut partial = 0.0;
        for j in 0..=p {
            if j > 0 {
                partial += deltas[j - 1];
            }
            profile.push(theta * (1.0 - partial));
        }
        let model = Self {
            theta,
            sigma,
            deltas,
            profile,
        };
        if !(model.kl_number() > 0.0) {
            return Err(Error::invalid("deltas", "drift q is zero because the coefficients sum to 1"));
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.deltas.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `q = θ² (1 - Σ δ_j)² / (2σ²)`.
    pub fn drift(&self) -> f64 {
        let s: f64 = self.deltas.iter().sum();
        self.theta * self.theta * (1.0 - s) * (1.0 - s) / (2.0 * self.sigma * self.sigma)
    }

    /// `X̃_1..X̃_n`.
    pub fn whiten(&self, observations: &[f64]) -> Vec<f64> {
        (0..observations.len())
            .map(|i| self.whiten_at(observations, i))
            .collect()
    }

    // 0-based position i; uses up to p previous values.
    fn whiten_at(&self, xs: &[f64], i: usize) -> f64 {
        let lags = self.deltas.len().min(i);
        let mut v = xs[i];
        for j in 1..=lags {
            v -= self.deltas[j - 1] * xs[i - j];
        }
        v
    }

    /// `θ̃_i(k)` for `i ≥ k`; zero before the change.
    pub fn signal(&self, i: usize, k: usize) -> f64 {
        if i < k {
            0.0
        } else {
            self.profile[(i - k).min(self.deltas.len())]
        }
    }

    /// Whitened sequence together with the signature `θ̃_i(k)`, `i = 1..n`.
    pub fn whiten_with_profile(&self, observations: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
        let whitened = self.whiten(observations);
        let profile = (1..=observations.len()).map(|i| self.signal(i, k)).collect();
        (whitened, profile)
    }

    #[inline]
    fn term(&self, signal: f64, whitened: f64) -> f64 {
        (signal * whitened - 0.5 * signal * signal) / (self.sigma * self.sigma)
    }
}

fn companion_spectral_radius(deltas: &[f64]) -> f64 {
    let p = deltas.len();
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (j, d) in deltas.iter().enumerate() {
        companion[(0, j)] = *d;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl ChangeModel for ArModel {
    type Obs = f64;
    type Sampler = ArSampler;
    type Process = ArProcess;

    fn name(&self) -> &'static str {
        "ar"
    }

    fn capability(&self) -> Capability {
        Capability::ChangePointDependent
    }

    fn kl_number(&self) -> f64 {
        self.drift()
    }

    fn sampler(&self, change: ChangePoint) -> ArSampler {
        ArSampler {
            theta: self.theta,
            deltas: self.deltas.clone(),
            noise: Normal::new(0.0, self.sigma).expect("sigma validated at construction"),
            history: VecDeque::from(vec![0.0; self.deltas.len()]),
            change,
            n: 0,
        }
    }

    fn llr_process(&self) -> ArProcess {
        ArProcess {
            model: self.clone(),
            observations: Vec::new(),
            whitened: Vec::new(),
            stationary: PrefixSums::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArSampler {
    theta: f64,
    deltas: Vec<f64>,
    noise: Normal<f64>,
    // Most recent noise value first.
    history: VecDeque<f64>,
    change: ChangePoint,
    n: usize,
}

impl ObservationSampler for ArSampler {
    type Obs = f64;

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.n += 1;
        let ar: f64 = self.deltas.iter().zip(&self.history).map(|(d, v)| d * v).sum();
        let v = ar + self.noise.sample(rng);
        self.history.pop_back();
        self.history.push_front(v);
        if self.change.is_post_change(self.n) {
            self.theta + v
        } else {
            v
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArProcess {
    model: ArModel,
    observations: Vec<f64>,
    whitened: Vec<f64>,
    // Stationary-signature terms (offset ≥ p).
    stationary: PrefixSums,
}

impl ArProcess {
    pub fn whitened(&self) -> &[f64] {
        &self.whitened
    }
}

impl LlrProcess for ArProcess {
    type Obs = f64;

    fn n(&self) -> usize {
        self.observations.len()
    }

    fn observe(&mut self, x: &f64) -> Result<()> {
        self.observations.push(*x);
        let i = self.observations.len() - 1;
        let w = self.model.whiten_at(&self.observations, i);
        self.whitened.push(w);
        let p = self.model.order();
        self.stationary.push(self.model.term(self.model.profile[p], w));
        Ok(())
    }

    fn increment(&self) -> Option<f64> {
        None
    }

    fn llr(&self, k: usize) -> f64 {
        let n = self.n();
        let p = self.model.order();
        let transient_end = n.min(k + p - 1);
        let transient: f64 = (k..=transient_end)
            .map(|i| self.model.term(self.model.profile[i - k], self.whitened[i - 1]))
            .sum();
        transient + self.stationary.range(transient_end + 1, n)
    }
}
