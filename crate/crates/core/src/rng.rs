//! Seed derivation.
//!
//! Every random draw is keyed by a `u64` seed. Child seeds are derived from
//! `(parent, index)` with two rounds of SplitMix64 finalization, so draws can
//! run in any order or on any thread and still reproduce bit-for-bit:
//!
//! `child_seed(parent, i) = mix(mix(parent) ^ mix(i + 0x9E3779B97F4A7C15))`
//!
//! Generators are ChaCha8 streams, whose output is platform independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix(mix(parent) ^ mix(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Child seed keyed by a label, for streams that must not depend on list order.
pub fn labeled_seed(parent: u64, label: &str) -> u64 {
    // FNV-1a, stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    child_seed(parent, h)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
