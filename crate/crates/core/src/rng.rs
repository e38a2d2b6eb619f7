//! Seeded random streams and mergeable Monte Carlo statistics.
//!
//! Every sampling routine takes a [`ChaCha8Rng`] derived from `(seed, stream)`.
//! Parallel estimators cut the work into fixed chunks, give chunk `c` its own
//! stream, and merge partial results in chunk order, so results do not depend
//! on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub type Rng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Welford accumulator; `merge` is exact up to float rounding and order-fixed
/// by the callers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 { 0.0 } else { self.m2 / (self.n - 1) as f64 }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            std_err: (self.variance() / self.n.max(1) as f64).sqrt(),
            samples: self.n,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Default chunk length for parallel Monte Carlo.
pub const CHUNK: u64 = 4096;

/// Averages `f(rng)` over `rounds` draws. Chunk `c` uses stream
/// `stream_base + c`.
pub fn mc_mean<F>(seed: u64, stream_base: u64, rounds: u64, f: F) -> Estimate
where
    F: Fn(&mut Rng) -> f64 + Sync,
{
    mc_moments(seed, stream_base, rounds, |rng, m| m.push(f(rng)))[0].estimate()
}

/// Like [`mc_mean`] but each draw may feed several accumulators (all slots
/// must be pushed the same number of times for the SEs to be meaningful).
pub fn mc_moments<F>(seed: u64, stream_base: u64, rounds: u64, f: F) -> Vec<Moments>
where
    F: Fn(&mut Rng, &mut MomentSink) + Sync,
{
    let chunks = rounds.div_ceil(CHUNK);
    let partials: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, stream_base.wrapping_add(c));
            let len = CHUNK.min(rounds - c * CHUNK);
            let mut sink = MomentSink::default();
            for _ in 0..len {
                sink.cursor = 0;
                f(&mut rng, &mut sink);
            }
            sink.slots
        })
        .collect();
    let mut total: Vec<Moments> = Vec::new();
    for part in partials {
        if total.len() < part.len() {
            total.resize(part.len(), Moments::default());
        }
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p);
        }
    }
    if total.is_empty() {
        total.push(Moments::default());
    }
    total
}

/// Ordered accumulators written by one Monte Carlo draw.
#[derive(Default)]
pub struct MomentSink {
    slots: Vec<Moments>,
    cursor: usize,
}

impl MomentSink {
    /// Records `x` into the next slot of this draw.
    pub fn push(&mut self, x: f64) {
        if self.cursor == self.slots.len() {
            self.slots.push(Moments::default());
        }
        self.slots[self.cursor].push(x);
        self.cursor += 1;
    }
}
