//! Counter-based random streams.
//!
//! Every replica (or Monte Carlo block) draws from its own ChaCha stream,
//! addressed by `(seed, index)`. Streams do not depend on the order in which
//! they are created, so parallel and sequential runs see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The random stream for `(seed, index)`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a tag into a seed (SplitMix64 finaliser), e.g. to give each entry of
/// a dilation schedule an unrelated master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
