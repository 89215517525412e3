// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-trial random streams.
//!
//! Every trial owns two ChaCha streams keyed by `(seed, trial index)`: one
//! for observations and one for the change-point draw. Keeping them apart
//! lets campaigns that differ only in how `λ` is chosen replay identical
//! observation noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Observations = 0,
    ChangePoint = 1,
}

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(2).wrapping_add(stream as u64));
    rng
}
