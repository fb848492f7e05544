//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from [`QrffRng`], a ChaCha8
//! stream keyed by a 64-bit seed. Independent sub-streams are derived with
//! [`derive_seed`], a SplitMix64 fold over a list of tags, so that e.g. the
//! feature map, the quantizer dither and the permutation null of one
//! experiment cell never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type QrffRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> QrffRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold `tags` into `base`, producing a well-mixed child seed.
///
/// `derive_seed(s, &[a, b]) != derive_seed(s, &[b, a])` in general; tag order
/// is part of the identity of the stream.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}
