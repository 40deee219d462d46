//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from [`ProfileRng`], which is
//! ChaCha8 seeded from a single `u64`. Independent streams (bootstrap
//! replicates, simulated conditions) are derived by mixing the root seed with
//! a stream index through SplitMix64, so results do not depend on execution
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ProfileRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under the root `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn seeded(seed: u64) -> ProfileRng {
    ProfileRng::seed_from_u64(seed)
}

pub fn stream(seed: u64, index: u64) -> ProfileRng {
    seeded(derive_seed(seed, index))
}
