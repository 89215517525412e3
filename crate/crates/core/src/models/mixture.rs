// SPDX-License-Identifier: MIT OR Apache-2.0

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{Capability, ChangeModel, ChangePoint, LlrProcess, ObservationSampler, PrefixSums};
use crate::error::{Error, Result};
use crate::numerics::softplus;

/// One-dimensional densities with analytic log-densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Density {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
}

impl Density {
    fn validate(&self, name: &'static str) -> Result<()> {
        let ok = match *self {
            Density::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Density::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(name, format!("invalid density parameters {self:?}")))
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Density::Gaussian { .. } => "gaussian",
            Density::Exponential { .. } => "exponential",
        }
    }

    /// `log p(x)`, `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Density::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            Density::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Density::Gaussian { mean, .. } => mean,
            Density::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Density::Gaussian { sd, .. } => sd * sd,
            Density::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Density::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
        }
    }

    /// Kullback-Leibler divergence `E_self log(self / other)`; `+inf` when
    /// `self` puts mass where `other` has none.
    pub fn kl_to(&self, other: &Density) -> f64 {
        match (*self, *other) {
            (Density::Gaussian { mean: m1, sd: s1 }, Density::Gaussian { mean: m2, sd: s2 }) => {
                (s2 / s1).ln() + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5
            }
            (Density::Exponential { rate: a }, Density::Exponential { rate: b }) => (a / b).ln() + b / a - 1.0,
            (Density::Exponential { rate }, Density::Gaussian { mean, sd }) => {
                // E log f = log λ - 1; E log g = -log(sd √(2π)) - E(X - μ)² / (2 sd²).
                let second = self.variance() + (1.0 / rate - mean).powi(2);
                (rate.ln() - 1.0) + sd.ln() + 0.5 * (2.0 * PI).ln() + second / (2.0 * sd * sd)
            }
            (Density::Gaussian { .. }, Density::Exponential { .. }) => f64::INFINITY,
        }
    }
}

/// Pre-change mixture `f_0(X_1^n) = β Π g_1(X_i) + (1 - β) Π g_2(X_i)`,
/// i.i.d. `f_1` after the change.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    beta: f64,
    g1: Density,
    g2: Density,
    f1: Density,
    log_v: f64,
    i1: f64,
    i2: f64,
}

impl MixtureModel {
    pub fn new(beta: f64, g1: Density, g2: Density, f1: Density) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")));
        }
        g1.validate("g1")?;
        g2.validate("g2")?;
        f1.validate("f1")?;
        if g1 == g2 || g1 == f1 || g2 == f1 {
            return Err(Error::invalid("g1", "g1, g2 and f1 must be pairwise distinct"));
        }
        let i1 = f1.kl_to(&g1);
        let i2 = f1.kl_to(&g2);
        if !(i1.is_finite() && i2.is_finite()) {
            return Err(Error::invalid("f1", "f1 must be absolutely continuous with respect to g1 and g2"));
        }
        if !(i1 > i2 && i2 > 0.0) {
            return Err(Error::invalid("g1", format!("requires I_1 > I_2 > 0, got I_1 = {i1}, I_2 = {i2}")));
        }
        Ok(Self {
            beta,
            g1,
            g2,
            f1,
            log_v: (beta / (1.0 - beta)).ln(),
            i1,
            i2,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn components(&self) -> (Density, Density, Density) {
        (self.g1, self.g2, self.f1)
    }

    /// `I_1 = E_1 log(f_1 / g_1)`.
    pub fn i1(&self) -> f64 {
        self.i1
    }

    /// `I_2 = E_1 log(f_1 / g_2)`; the drift of the LLR.
    pub fn i2(&self) -> f64 {
        self.i2
    }

    /// `Z_n^k` on a full trajectory.
    pub fn llr(&self, observations: &[f64], k: usize, n: usize) -> Result<f64> {
        if k == 0 || k > n || n > observations.len() {
            return Err(Error::OutOfRange {
                index: k,
                reason: format!("mixture LLR requires 1 <= k <= n <= {}", observations.len()),
            });
        }
        let process = self.process_trajectory(&observations[..n])?;
        Ok(process.llr(k))
    }
}

impl ChangeModel for MixtureModel {
    type Obs = f64;
    type Sampler = MixtureSampler;
    type Process = MixtureProcess;

    fn name(&self) -> &'static str {
        "mixture"
    }

    fn capability(&self) -> Capability {
        Capability::ChangePointDependent
    }

    fn kl_number(&self) -> f64 {
        self.i2
    }

    fn sampler(&self, change: ChangePoint) -> MixtureSampler {
        MixtureSampler {
            model: self.clone(),
            component: None,
            change,
            n: 0,
        }
    }

    fn llr_process(&self) -> MixtureProcess {
        MixtureProcess {
            model: self.clone(),
            r2: PrefixSums::default(),
            log_xi: vec![0.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixtureSampler {
    model: MixtureModel,
    // true when the pre-change segment follows g1.
    component: Option<bool>,
    change: ChangePoint,
    n: usize,
}

impl ObservationSampler for MixtureSampler {
    type Obs = f64;

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.n += 1;
        if self.change.is_post_change(self.n) {
            return self.model.f1.draw(rng);
        }
        let beta = self.model.beta;
        let first = *self.component.get_or_insert_with(|| rng.random::<f64>() < beta);
        if first {
            self.model.g1.draw(rng)
        } else {
            self.model.g2.draw(rng)
        }
    }
}

/// `Z_n^k = Σ_{i=k}^n R_2(i) + log(1 + v ξ_{k-1}) - log(1 + v ξ_n)` with
/// `ξ` carried in the log domain.
#[derive(Debug, Clone)]
pub struct MixtureProcess {
    model: MixtureModel,
    r2: PrefixSums,
    // log_xi[i] = log ξ_i, log ξ_0 = 0.
    log_xi: Vec<f64>,
}

impl MixtureProcess {
    /// `log ξ_i`.
    pub fn log_xi(&self, i: usize) -> f64 {
        self.log_xi[i]
    }

    #[inline]
    fn correction(&self, i: usize) -> f64 {
        softplus(self.model.log_v + self.log_xi[i])
    }
}

impl LlrProcess for MixtureProcess {
    type Obs = f64;

    fn n(&self) -> usize {
        self.r2.len()
    }

    fn observe(&mut self, x: &f64) -> Result<()> {
        let index = self.n() + 1;
        let m = &self.model;
        let (lf1, lg1, lg2) = (m.f1.log_pdf(*x), m.g1.log_pdf(*x), m.g2.log_pdf(*x));
        for (value, density) in [(lf1, "f1"), (lg1, "g1"), (lg2, "g2")] {
            if value == f64::NEG_INFINITY {
                return Err(Error::ZeroDensity { index, density });
            }
        }
        self.r2.push(lf1 - lg2);
        let last = *self.log_xi.last().unwrap();
        self.log_xi.push(last + lg1 - lg2);
        Ok(())
    }

    fn increment(&self) -> Option<f64> {
        None
    }

    fn llr(&self, k: usize) -> f64 {
        let n = self.n();
        self.r2.range(k, n) + self.correction(k - 1) - self.correction(n)
    }
}
