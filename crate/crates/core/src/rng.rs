//! Seed derivation and per-variable random streams.
//!
//! Every random quantity in a simulated trial is drawn from a ChaCha8
//! stream keyed by the trial seed and a [`Stream`] tag, and consumed in
//! participant order. Two trials that share a seed therefore share their
//! baseline, latent class, stage 1 allocation and noise draws even when they
//! use different classifiers. Child seeds (replicate `r` of a cell, cell `k`
//! of a grid) come from [`derive_seed`], so results never depend on which
//! thread ran which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Variable tag selecting an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Baseline = 1,
    Latent = 2,
    Stage1Allocation = 3,
    Stage1Noise = 4,
    Stage2Allocation = 5,
    Stage2Noise = 6,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    mix64(parent ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn stream(seed: u64, tag: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag as u64);
    rng
}
