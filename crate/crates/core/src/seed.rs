//! Deterministic seed fan-out.
//!
//! Every randomized routine takes an explicit `u64` seed. Experiments derive
//! per-trial seeds from a master seed with [`derive_seed`], which is a fixed
//! function (FNV-1a over the tag, SplitMix64 finalisation) and therefore stable
//! across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type TrialRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed for one trial of one sweep point of one experiment.
pub fn derive_seed(master: u64, experiment: &str, sweep_index: u64, trial_index: u64) -> u64 {
    let mut h = splitmix64(master ^ fnv1a(experiment.as_bytes()));
    h = splitmix64(h ^ sweep_index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(h ^ trial_index.wrapping_mul(0xA076_1D64_78BD_642F))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable() {
        // Frozen values: changing the mixer would silently change every
        // published experiment.
        assert_eq!(derive_seed(0, "", 0, 0), 0x5db1_c9c9_3624_d952);
        assert_eq!(derive_seed(42, "fig8", 3, 7), 0xf9fa_0643_8b8b_e91d);
    }

    #[test]
    fn derived_seeds_separate_indices() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..20 {
            for t in 0..50 {
                assert!(seen.insert(derive_seed(1, "fig10", s, t)));
            }
        }
        assert_ne!(derive_seed(1, "fig8", 0, 0), derive_seed(1, "fig9", 0, 0));
        assert_ne!(derive_seed(1, "fig8", 0, 0), derive_seed(2, "fig8", 0, 0));
    }
}
