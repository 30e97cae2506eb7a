//! Deterministic random streams.
//!
//! Every consumer derives its generator from the master seed, a purpose tag
//! and an index, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes, kept distinct so that e.g. latent paths and site draws
/// never share randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Latent = 1,
    Values = 2,
    Replicate = 3,
    MonteCarlo = 4,
    Auxiliary = 5,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(purpose as u64)));
    rng.set_stream(index);
    rng
}

/// Seed for replicate `r` of a campaign with master seed `seed`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    if r == 0 {
        seed
    } else {
        mix(seed ^ mix((Purpose::Replicate as u64) << 56 | r))
    }
}
