//! Portable deterministic random numbers.
//!
//! The generator is xoshiro256** (Blackman & Vigna). Its 256-bit state
//! `s[0..4]` advances as
//!
//! ```text
//! result = rotl(s[1] * 5, 7) * 9
//! t      = s[1] << 17
//! s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
//! s[2] ^= t;    s[3]  = rotl(s[3], 45)
//! ```
//!
//! with wrapping 64-bit arithmetic. A `u64` seed is expanded into the state by
//! four SplitMix64 outputs. Uniform floats take the top 53 bits:
//! `(x >> 11) * 2^-53`, which lies in `[0, 1)`.
//!
//! Sub-streams for independent work items come from [`derive_seed`], which
//! folds tags into a seed with the SplitMix64 finalizer, so results never
//! depend on scheduling or thread count.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `h = seed; for t in tags { h = mix64(h ^ mix64(t + GOLDEN_GAMMA)) }`.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |h, &t| {
        mix64(h ^ mix64(t.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// Single-owner xoshiro256** stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Independent stream for the work item identified by `tags`.
    pub fn derived(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(seed, tags))
    }

    /// Seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for tiny ranges
        if v >= hi {
            lo
        } else {
            v
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_f64() * n as f64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Tensor of i.i.d. uniform draws in `[lo, hi)`.
pub fn rng_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
    if !(lo < hi) {
        return Err(Error::InvalidRange { lo, hi });
    }
    let mut t = Tensor::zeros(shape)?;
    for v in t.data_mut() {
        *v = rng.uniform(lo, hi);
    }
    Ok(t)
}
