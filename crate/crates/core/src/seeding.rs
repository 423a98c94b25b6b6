//! Sub-seed derivation. Every random stream in a run is keyed by
//! `(base seed, purpose, item identity)` so results do not depend on
//! iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mixes a base seed with a purpose label and a list of integer keys.
pub fn derive_seed(base: u64, purpose: &str, keys: &[u64]) -> u64 {
    let mut h = splitmix(base ^ hash_str(purpose));
    for &k in keys {
        h = splitmix(h ^ k);
    }
    h
}

pub fn rng_for(base: u64, purpose: &str, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, purpose, keys))
}
