//! Counter-based random streams.
//!
//! Stream `i` of seed `s` is ChaCha8 keyed by `s` with stream id `i`, so the
//! draws of walk `i` never depend on which thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct StreamFactory {
    key: <ChaCha8Rng as SeedableRng>::Seed,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory {
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
        }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Stream ids reserved for auxiliary sampling, far above any walk index.
pub const AUX_STREAM_BASE: u64 = 1 << 62;
