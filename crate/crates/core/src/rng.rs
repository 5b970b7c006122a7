//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by `(seed, stream, index)`:
//! the seed selects the ChaCha key, the stream/index pair selects the block
//! position. Draws are therefore independent of evaluation order, which keeps
//! parallel rendering and training reproducible.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Well-known stream identifiers so unrelated consumers never share draws.
pub mod streams {
    pub const DEPTH_NOISE: u64 = 1;
    pub const COLOR_NOISE: u64 = 2;
    pub const RAY_BATCH: u64 = 3;
    pub const RANDOM_POLICY: u64 = 4;
    pub const VIEW_SAMPLING: u64 = 5;
    pub const TEST_DATA: u64 = 6;
}

/// A keyed generator handing out independent sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator positioned at `(stream, index)`. Each index owns a disjoint
    /// window of 2^32 words inside the stream.
    pub fn at(&self, stream: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(index) << 32);
        rng
    }

    pub fn uniform(&self, stream: u64, index: u64) -> f64 {
        self.at(stream, index).random::<f64>()
    }

    pub fn normal(&self, stream: u64, index: u64) -> f64 {
        StandardNormal.sample(&mut self.at(stream, index))
    }

    pub fn u64(&self, stream: u64, index: u64) -> u64 {
        self.at(stream, index).next_u64()
    }

    /// Derive a child seed, e.g. per round of an experiment loop.
    pub fn derive(&self, stream: u64, index: u64) -> CounterRng {
        CounterRng::new(self.u64(stream, index))
    }
}

/// Stable 64-bit hash of a label (FNV-1a); used to key draws by view id.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
