//! Deterministic seed derivation.
//!
//! Every stochastic draw in the crate flows from a single master seed
//! through [`derive_seed`], so results are reproducible for a fixed seed
//! regardless of thread count or scheduling order. Sub-streams are keyed by
//! a domain tag plus counters (hour, window, iteration, sample) rather than
//! by shared mutable RNG state.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Stream tags keeping unrelated draw streams statistically independent.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    /// EV attribute sampling for one spawn hour.
    Spawn,
    /// Per-hour Gumbel perception errors.
    Gumbel,
    /// CEM population sampling.
    CemSample,
    /// Categorical assignment draws.
    ChoiceSample,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Spawn => 0x5350_4157_4e00_0001,
            Stream::Gumbel => 0x4755_4d42_454c_0002,
            Stream::CemSample => 0x4345_4d53_414d_0003,
            Stream::ChoiceSample => 0x4348_4f49_4345_0004,
        }
    }
}

/// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from the master seed, a stream tag, and counters.
pub fn derive_seed(master: u64, stream: Stream, counters: &[u64]) -> u64 {
    let mut acc = splitmix64(master ^ stream.tag());
    for &c in counters {
        acc = splitmix64(acc ^ c.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    acc
}

/// A ChaCha8 RNG seeded from a derived seed.
pub fn rng_for(master: u64, stream: Stream, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_inputs_same_seed() {
        let a = derive_seed(42, Stream::Spawn, &[3, 7]);
        let b = derive_seed(42, Stream::Spawn, &[3, 7]);
        assert_eq!(a, b);
    }

    #[test]
    fn streams_and_counters_separate() {
        let base = derive_seed(42, Stream::Spawn, &[3]);
        assert_ne!(base, derive_seed(42, Stream::Gumbel, &[3]));
        assert_ne!(base, derive_seed(42, Stream::Spawn, &[4]));
        assert_ne!(base, derive_seed(43, Stream::Spawn, &[3]));
    }

    #[test]
    fn rng_reproducible() {
        let mut r1 = rng_for(7, Stream::CemSample, &[0, 1, 2]);
        let mut r2 = rng_for(7, Stream::CemSample, &[0, 1, 2]);
        let x1: f64 = r1.random();
        let x2: f64 = r2.random();
        assert_eq!(x1, x2);
    }
}
