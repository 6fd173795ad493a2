//! Deterministic random streams.
//!
//! Every Monte Carlo consumer receives a [`StreamKey`] instead of a live
//! generator. Work is split into fixed-size batches and batch `i` always draws
//! from `key.child(i)`, so results do not depend on how many worker threads
//! happen to execute the batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of samples per Monte Carlo batch. Fixed so that the partition of
/// work into streams never depends on the thread count.
pub const BATCH_SIZE: usize = 1024;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Handle to an independent random stream: a seed plus a derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive a child stream. Children with distinct tags are independent
    /// ChaCha streams under the same seed.
    pub fn child(&self, tag: u64) -> Self {
        let path = splitmix64(self.path ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)));
        Self { seed: self.seed, path }
    }

    /// Derive a child stream from a string label.
    pub fn named(&self, label: &str) -> Self {
        // FNV-1a over the label; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }
}

/// Running mean and variance, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination of two partial accumulators.
    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.count as f64 / n);
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64 / n);
        self.count += other.count;
        self.mean = mean;
        self.m2 = m2;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (zero for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Split `total` samples into fixed-size batches, run `batch` on each with
/// its own child stream, and merge the partial results in batch order.
///
/// `batch(key, n)` must draw exactly from `key` and produce `n` samples.
pub fn batched<T, F, M>(total: usize, key: StreamKey, batch: F, mut merge: M, init: T) -> T
where
    T: Send,
    F: Fn(StreamKey, usize) -> T + Sync + Send,
    M: FnMut(&mut T, T),
{
    let n_batches = total.div_ceil(BATCH_SIZE);
    let sizes: Vec<(u64, usize)> = (0..n_batches)
        .map(|i| {
            let start = i * BATCH_SIZE;
            (i as u64, BATCH_SIZE.min(total - start))
        })
        .collect();
    let parts = map_ordered(&sizes, |&(i, n)| batch(key.child(i), n));
    let mut acc = init;
    for p in parts {
        merge(&mut acc, p);
    }
    acc
}

/// Order-preserving map, parallel when the `parallel` feature is on.
pub fn map_ordered<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
