//! Reproducible random streams keyed by (master seed, experiment, replicate).
//!
//! Each logical stream derives an independent ChaCha8 key from its three-part
//! key via a splitmix64 chain, so streams can be created in any order, on any
//! thread, and always yield the same draws. Nothing here reads wall-clock
//! entropy.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one logical random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub experiment: u64,
    pub replicate: u64,
}

impl StreamKey {
    pub fn new(master: u64, experiment: u64, replicate: u64) -> Self {
        Self { master, experiment, replicate }
    }

    /// Child key for a nested purpose (e.g. marker draws vs arrival draws
    /// inside one replicate).
    pub fn child(&self, purpose: u64) -> Self {
        Self {
            master: self.master,
            experiment: self.experiment ^ purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15),
            replicate: self.replicate,
        }
    }

    /// Instantiate the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = splitmix64(self.master ^ 0x1234_5678_9abc_def0);
        state = splitmix64(state ^ self.experiment);
        state = splitmix64(state ^ self.replicate);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
