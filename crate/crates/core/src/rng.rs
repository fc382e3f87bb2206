//! Seeded randomness shared by every randomized operation.
//!
//! The generator is xoshiro256++ seeded through SplitMix64 (the
//! `seed_from_u64` path of [`rand_xoshiro::Xoshiro256PlusPlus`]). Batch
//! operations derive one independent seed per record by hashing
//! `seed + (index + 1) * GOLDEN_GAMMA` with the SplitMix64 finalizer, so
//! records can be produced in any order, or in parallel, without changing
//! a single output byte.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The SplitMix64 increment.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The toolkit RNG.
pub type SeededRng = Xoshiro256PlusPlus;

/// Build the generator for a given seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the per-record seed for `index` under a batch `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_from_seed(42);
        let mut b = rng_from_seed(42);
        for _ in 0..16 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn derived_seeds_differ_across_indices() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn derived_seed_is_stable() {
        // Frozen values: the derivation is part of the reproducibility contract.
        assert_eq!(derive_seed(0, 0), mix64(GOLDEN_GAMMA));
        assert_eq!(derive_seed(1, 0), derive_seed(1, 0));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
