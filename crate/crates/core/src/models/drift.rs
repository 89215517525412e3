// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;

use super::{check_positive, Capability, ChangeModel, ChangePoint, LlrProcess, ObservationSampler, PrefixSums};
use crate::error::Result;

/// Degenerate source whose LLR increment is exactly `+q` after the change and
/// `-q` before it. The observation *is* the increment. Used to replay
/// stopping rules on deterministic paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicDrift {
    q: f64,
}

impl DeterministicDrift {
    pub fn new(q: f64) -> Result<Self> {
        check_positive("q", q)?;
        Ok(Self { q })
    }
}

impl ChangeModel for DeterministicDrift {
    type Obs = f64;
    type Sampler = DriftSampler;
    type Process = DriftProcess;

    fn name(&self) -> &'static str {
        "deterministic_drift"
    }

    fn capability(&self) -> Capability {
        Capability::IncrementStationary
    }

    fn kl_number(&self) -> f64 {
        self.q
    }

    fn nonarithmetic(&self) -> bool {
        false
    }

    fn sampler(&self, change: ChangePoint) -> DriftSampler {
        DriftSampler { q: self.q, change, n: 0 }
    }

    fn llr_process(&self) -> DriftProcess {
        DriftProcess::default()
    }
}

#[derive(Debug, Clone)]
pub struct DriftSampler {
    q: f64,
    change: ChangePoint,
    n: usize,
}

impl ObservationSampler for DriftSampler {
    type Obs = f64;

    fn draw<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> f64 {
        self.n += 1;
        if self.change.is_post_change(self.n) {
            self.q
        } else {
            -self.q
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DriftProcess {
    sums: PrefixSums,
}

impl LlrProcess for DriftProcess {
    type Obs = f64;

    fn n(&self) -> usize {
        self.sums.len()
    }

    fn observe(&mut self, x: &f64) -> Result<()> {
        self.sums.push(*x);
        Ok(())
    }

    fn increment(&self) -> Option<f64> {
        self.sums.last_increment()
    }

    fn llr(&self, k: usize) -> f64 {
        self.sums.range(k, self.n())
    }
}
