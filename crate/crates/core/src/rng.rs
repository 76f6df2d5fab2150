//! Reproducible random streams.
//!
//! Every Monte-Carlo routine takes a 64-bit seed. Work is split into chunks and
//! chunk `i` draws from ChaCha stream `i` of that seed, so results do not depend
//! on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent substream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed, used to separate e.g. training and evaluation passes.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Split `total` items into chunks of at most `chunk`, yielding `(stream, len)`.
pub(crate) fn chunks(total: usize, chunk: usize) -> Vec<(u64, usize)> {
    let chunk = chunk.max(1);
    (0..total.div_ceil(chunk)).map(|i| (i as u64, chunk.min(total - i * chunk))).collect()
}
