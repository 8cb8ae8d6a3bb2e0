//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed with 32 bytes laid out as
//! `master seed | stream tag | index a | index b`, each a little-endian u64.
//! The key map is injective, so two streams collide only if all four words
//! match. Streams are reproducible within one build of the engine; nothing
//! is promised about matching other implementations bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose tags used to derive independent sub-streams from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Master = 0,
    Init = 1,
    Shuffle = 2,
    Augment = 3,
    Split = 4,
    GradCheck = 5,
    Fixture = 6,
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, Stream::Master, 0, 0)
    }

    /// Sub-stream for `purpose`, further indexed by `(a, b)` (e.g. epoch and
    /// sample position).
    pub fn stream(seed: u64, purpose: Stream, a: u64, b: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&a.to_le_bytes());
        key[24..32].copy_from_slice(&b.to_le_bytes());
        Self {
            seed,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `[lo, hi)`. Returns `lo` when the range is degenerate.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.unit()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}
