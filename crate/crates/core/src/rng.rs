//! Seeded random streams.
//!
//! Every stochastic step in the simulator draws from a [`Stream`] seeded by
//! [`derive_seed`], so a run is a pure function of its master seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

/// Purpose tags mixed into derived seeds so that streams never overlap.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const DP_NOISE: u64 = 3;
    pub const SVT: u64 = 4;
    pub const DATA: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` with a splitmix64 chain.
///
/// Unlike a plain XOR, `(site=1, round=0)` and `(site=0, round=1)` map to
/// different seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_stream(master: u64, parts: &[u64]) -> Stream {
    stream(derive_seed(master, parts))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Laplace(0, scale) by inverse CDF of a single uniform draw.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
