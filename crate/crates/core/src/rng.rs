//! Seed derivation.
//!
//! All randomness comes from ChaCha8 streams keyed by 64-bit seeds. Child
//! seeds are derived with the SplitMix64 finaliser, so the derivation is
//! bit-exact and independent of thread scheduling:
//!
//! ```text
//! mix(x)            = splitmix64 finaliser of x + 0x9E3779B97F4A7C15
//! derive(parent, t) = mix(parent ^ mix(t))
//! point_seed        = derive(master, snr_index)
//! trial_seed        = derive(point_seed, trial_index)
//! stage_seed        = derive(trial_seed, Stream tag)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, tag: u64) -> u64 {
    mix(parent ^ mix(tag))
}

/// Seed of one trial within a sweep.
pub fn trial_seed(master: u64, snr_index: usize, trial_index: usize) -> u64 {
    derive(derive(master, snr_index as u64), trial_index as u64)
}

/// Independent random streams used inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Bits = 1,
    Pilots = 2,
    Channel = 3,
    Noise = 4,
}

pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    derive(trial_seed, stream as u64)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
