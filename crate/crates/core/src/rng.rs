//! Seed derivation.
//!
//! Every random quantity in the crate comes from a ChaCha stream whose seed is
//! derived from a master seed and a label. Deriving instead of sharing one
//! stream means the feature matrix stays fixed when only the perturbation
//! stream changes, and adding grid cells never reshuffles existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Named substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Features,
    Filter,
    Perturbation,
    Init,
    Split,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Features => 0x6665_6174,
            Stream::Filter => 0x6669_6c74,
            Stream::Perturbation => 0x7065_7274,
            Stream::Init => 0x696e_6974,
            Stream::Split => 0x7370_6c74,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn substream_seed(seed: u64, stream: Stream) -> u64 {
    mix(&[seed, stream.tag()])
}

pub fn rng_from(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha20Rng {
    rng_from(substream_seed(seed, stream))
}

pub fn standard_normal_vec<R: rand::Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Seed of the `index`-th independent trial derived from `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    mix(&[seed, 0x7472_6961_6c00, index as u64])
}
