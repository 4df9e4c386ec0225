//! Seeds and counter-based substreams.
//!
//! A single master seed drives every stochastic routine. Independent work
//! units (clusters, components, replicates) draw from ChaCha streams selected
//! by their index, so the values a unit sees do not depend on the order or
//! thread in which units are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master seed for a reproducible computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Generator for substream `stream` of this seed.
    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// Child seed for the `index`-th independent task (SplitMix64 finalizer
    /// applied to the seed/index pair).
    pub fn derive(self, index: u64) -> Seed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
