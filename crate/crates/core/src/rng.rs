//! Deterministic random substreams.
//!
//! A single 64-bit run seed fans out into independent ChaCha8 streams keyed by
//! `(seed, domain, index)`. Per-atom work draws from its own stream, so results
//! do not depend on how rayon splits the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Values are part of the reproducibility contract; do not
/// renumber.
pub mod domain {
    pub const ENSEMBLE: u64 = 1;
    pub const PULSE: u64 = 2;
    pub const BLOW_AWAY: u64 = 3;
    pub const REPUMP: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const FLUORESCENCE: u64 = 6;
    pub const RADIAL: u64 = 7;
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable key derived from a seed and a path of sub-keys.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Factory for per-index streams within one `(seed, domain, sub)` family.
#[derive(Debug, Clone)]
pub struct StreamFamily {
    key: [u8; 32],
}

impl StreamFamily {
    pub fn new(seed: u64, path: &[u64]) -> Self {
        let mut key = [0u8; 32];
        let mut k = derive_key(seed, path);
        for chunk in key.chunks_exact_mut(8) {
            k = mix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        Self { key }
    }

    /// Independent stream for one index (typically an atom index).
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let fam = StreamFamily::new(42, &[domain::PULSE, 0]);
        let a: u64 = fam.stream(7).random();
        let b: u64 = StreamFamily::new(42, &[domain::PULSE, 0]).stream(7).random();
        let c: u64 = fam.stream(8).random();
        let d: u64 = StreamFamily::new(42, &[domain::PULSE, 1]).stream(7).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
