//! Deterministic instance generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twrbeam_core::physical::{random_channels, ChannelEnsemble};
use twrbeam_core::{PhysicalProblem, ReducedProblem};

/// Reduced instance in the regime where both constraints stay active.
pub fn sample_reduced(seed: u64, with_d: bool) -> ReducedProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15));
    let r = rng.random_range(0.6..1.0);
    let tk = 1.0 + r * r;
    let c1 = rng.random_range(0.4..2.5);
    let c2 = rng.random_range(0.4..2.5);
    let theta1 = if with_d { rng.random_range(0.1..0.7) } else { 0.0 };
    let theta2 = if with_d { rng.random_range(0.1..0.7) } else { 0.0 };
    ReducedProblem::from_coefficients(
        rng.random_range(0.0..2.0),
        rng.random_range(0.0..2.0),
        c1,
        c2,
        theta1 * c1 * tk,
        theta2 * c2 * tk,
        r,
    )
}

/// Physical instance with mildly asymmetric targets.
pub fn sample_physical(seed: u64, antennas: usize) -> PhysicalProblem {
    let ens = ChannelEnsemble {
        gamma1: 1.6,
        gamma2: 0.9,
        ..ChannelEnsemble::default()
    };
    random_channels(seed, antennas, &ens)
}
