//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a root seed plus a path of
//! tags (repetition index, feature, forest role, ...). Streams never depend on
//! the order in which work is scheduled, so results are identical for any
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a root seed with a tag path into a new 64-bit seed.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_mul(GOLDEN).wrapping_add(1)));
    }
    state
}

/// A ChaCha stream for `(seed, stream)`; distinct streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn rng_for(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}

/// Tags for the different streams so call sites stay readable.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const RESPONSE_FOREST: u64 = 3;
    pub const TRANSFORM_FOREST: u64 = 4;
    pub const PERMUTATION: u64 = 5;
    pub const STRATA: u64 = 6;
    pub const FEATURES: u64 = 7;
    pub const NOISE: u64 = 8;
    pub const FULL_FOREST: u64 = 9;
    pub const TEST_POINTS: u64 = 10;
    pub const WINDOW: u64 = 11;
    pub const REPETITION: u64 = 12;
    pub const GROUP: u64 = 13;
}
