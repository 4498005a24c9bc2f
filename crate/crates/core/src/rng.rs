//! Seeded, stream-addressable randomness.
//!
//! Every random object in the crate is drawn from an [`RngStream`], a
//! `(seed, stream_id)` pair that expands into a ChaCha8 keystream. ChaCha is
//! specified bit-for-bit, so a given pair yields the same numbers on every
//! platform, and distinct stream ids give independent streams under one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for iteration `index` of a run seeded with `self.seed`.
    pub fn derive(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: mix(mix(self.seed, self.stream_id), index),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two words into a well-scrambled third; used to derive stream ids.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(32) ^ 0xD6E8_FEB8_6659_FD93)
}
