// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared fixtures for the criterion benches.

use bqcd_core::rng::{trial_rng, Stream};
use bqcd_core::{ChangeModel, ChangePoint, ExpModel, Prior};

/// Exponential model with `Q = 1` and a geometric prior with `ρ = 0.1`.
pub fn exp_setup() -> (ExpModel, Prior) {
    (
        ExpModel::new(1.0).expect("valid Q"),
        Prior::geometric(0.1).expect("valid rho"),
    )
}

/// Pre-change trajectory of `n` exponential observations.
pub fn exp_trajectory(model: &ExpModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = trial_rng(seed, 0, Stream::Observations);
    model.sample_trajectory(ChangePoint::Never, n, &mut rng)
}
