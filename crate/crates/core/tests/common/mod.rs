//! Helpers shared by the integration tests.
#![allow(dead_code)]

use domainwall::dynamics::State;
use domainwall::params::{derive_params, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn params(epsilon: f64, g: f64) -> Params {
    derive_params(epsilon, g).expect("admissible parameters")
}

/// Deterministic pseudo-random states with entries in `[-scale, scale]`.
pub fn random_states(n: usize, scale: f64, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| State(std::array::from_fn(|_| rng.gen_range(-scale..=scale))))
        .collect()
}

/// Deterministic pseudo-random numbers in `[lo, hi]`.
pub fn random_values(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}
