// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{check_positive, Capability, ChangeModel, ChangePoint, LlrProcess, ObservationSampler, PrefixSums};
use crate::error::{Error, Result};

/// Scale change in an i.i.d. exponential sequence: `Exp(1)` before the change,
/// mean `1 + shift` after it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpModel {
    shift: f64,
    pre: Exp<f64>,
    post: Exp<f64>,
}

impl ExpModel {
    pub fn new(shift: f64) -> Result<Self> {
        check_positive("Q", shift)?;
        let pre = Exp::new(1.0).map_err(|e| Error::invalid("Q", e.to_string()))?;
        let post = Exp::new(1.0 / (1.0 + shift)).map_err(|e| Error::invalid("Q", e.to_string()))?;
        Ok(Self { shift, pre, post })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `ΔZ = -log(1 + Q) + x·Q/(1 + Q)`.
    pub fn llr_increment(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::SupportViolation {
                index: 0,
                reason: format!("exponential observations must be nonnegative, got {x}"),
            });
        }
        Ok(self.increment_unchecked(x))
    }

    #[inline]
    fn increment_unchecked(&self, x: f64) -> f64 {
        let q = self.shift;
        -q.ln_1p() + q / (1.0 + q) * x
    }

    /// Kullback-Leibler number `I(Q) = E_1 ΔZ = Q - log(1 + Q)`.
    ///
    /// The reverse divergence `log(1 + Q) - Q/(1 + Q)` is the drift of `-Z`
    /// before the change, not the post-change drift that sets the delay.
    pub fn kl(&self) -> f64 {
        let q = self.shift;
        q - q.ln_1p()
    }

    /// `E_∞(-ΔZ) = log(1 + Q) - Q/(1 + Q)`.
    pub fn reverse_kl(&self) -> f64 {
        let q = self.shift;
        q.ln_1p() - q / (1.0 + q)
    }

    /// Limiting `E_1 e^{-κ}`; exact for every threshold in this model.
    pub fn exact_zeta(&self) -> f64 {
        1.0 / (1.0 + self.shift)
    }

    /// Limiting mean overshoot; exact for every threshold in this model.
    pub fn exact_kappa_bar(&self) -> f64 {
        self.shift
    }
}

impl ChangeModel for ExpModel {
    type Obs = f64;
    type Sampler = ExpSampler;
    type Process = ExpProcess;

    fn name(&self) -> &'static str {
        "exponential"
    }

    fn capability(&self) -> Capability {
        Capability::IncrementStationary
    }

    fn kl_number(&self) -> f64 {
        self.kl()
    }

    fn sampler(&self, change: ChangePoint) -> ExpSampler {
        ExpSampler {
            pre: self.pre,
            post: self.post,
            change,
            n: 0,
        }
    }

    fn llr_process(&self) -> ExpProcess {
        ExpProcess {
            model: self.clone(),
            sums: PrefixSums::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpSampler {
    pre: Exp<f64>,
    post: Exp<f64>,
    change: ChangePoint,
    n: usize,
}

impl ObservationSampler for ExpSampler {
    type Obs = f64;

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.n += 1;
        if self.change.is_post_change(self.n) {
            self.post.sample(rng)
        } else {
            self.pre.sample(rng)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpProcess {
    model: ExpModel,
    sums: PrefixSums,
}

impl LlrProcess for ExpProcess {
    type Obs = f64;

    fn n(&self) -> usize {
        self.sums.len()
    }

    fn observe(&mut self, x: &f64) -> Result<()> {
        let dz = self.model.llr_increment(*x).map_err(|_| Error::SupportViolation {
            index: self.n() + 1,
            reason: format!("exponential observations must be nonnegative, got {x}"),
        })?;
        self.sums.push(dz);
        Ok(())
    }

    fn increment(&self) -> Option<f64> {
        self.sums.last_increment()
    }

    fn llr(&self, k: usize) -> f64 {
        self.sums.range(k, self.n())
    }
}
