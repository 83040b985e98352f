//! Seeded random number generation.
//!
//! Every stochastic step in the pipeline (parameter init, corpus synthesis,
//! triplet and window sampling) draws from a [`SeedRng`] constructed from an
//! explicit `u64` seed, so whole runs replay bit-identically. Substreams are
//! derived with [`SeedRng::derive`] so parallel generation of clips stays
//! schedule-independent.

use num_traits::Float;
use rand_core::{RngCore, SeedableRng};

use crate::real::Real;

/// Deterministic generator: ChaCha8 keyed by a user seed.
#[derive(Debug, Clone)]
pub struct SeedRng {
    inner: rand_chacha::ChaCha8Rng,
}

impl SeedRng {
    pub fn new(seed: u64) -> Self {
        SeedRng {
            inner: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent substream for (seed, stream id), e.g. per-clip generation.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&stream.to_le_bytes());
        key[16] = 0x9e;
        key[17] = 0x37;
        SeedRng {
            inner: rand_chacha::ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). n must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        Float::sqrt(-2.0 * Float::ln(u1)) * Float::cos(core::f64::consts::TAU * u2)
    }

    /// Geometric number of trials until first success (support >= 1),
    /// mean 1/p.
    pub fn geometric(&mut self, p: f64) -> usize {
        debug_assert!(p > 0.0 && p <= 1.0);
        let u = self.uniform();
        if p >= 1.0 {
            return 1;
        }
        let trials = Float::ceil(Float::ln(1.0 - u) / Float::ln(1.0 - p));
        Float::max(trials, 1.0) as usize
    }

    pub fn normal_r<R: Real>(&mut self) -> R {
        R::from_f64(self.normal())
    }
}
