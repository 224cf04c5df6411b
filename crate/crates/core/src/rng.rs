//! Named, seeded random streams.
//!
//! Every consumer of randomness draws from its own stream keyed by
//! `(seed, name, counter)`, so adding or removing one consumer never shifts
//! the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Derives a 64-bit sub-seed for a named stream.
pub fn derive_seed(seed: u64, name: &str, counter: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(name)).wrapping_add(counter))
}

pub fn stream(seed: u64, name: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name, counter))
}
