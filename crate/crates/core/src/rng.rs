//! Keyed random streams.
//!
//! Each unit of work (a focal window, a graph group, a Monte Carlo draw) gets
//! its own ChaCha stream derived from the global seed and a tuple of keys, so
//! results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams for different stages disjoint.
pub mod domain {
    pub const SYNTHESIS: u64 = 0x5359_4e54;
    pub const INJECTION: u64 = 0x494e_4a45;
    pub const SELECTION: u64 = 0x5345_4c45;
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const MONTE_CARLO: u64 = 0x4d43_4d43;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a seed and keys into a single 64-bit stream seed.
pub fn stream_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, keys))
}
