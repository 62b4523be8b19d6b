//! Deterministic substream derivation.
//!
//! All randomness in the crate flows through seeded ChaCha generators whose
//! seeds are derived by hashing index tuples. Results are therefore
//! reproducible regardless of execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a cheap, well-mixed 64-bit hash step.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a base seed with a tuple of indices into a new 64-bit seed.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &p in parts {
        state = splitmix64(state ^ p.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    state
}

/// Derive an independent generator for the given index tuple.
pub fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}
