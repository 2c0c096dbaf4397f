//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! user seed, with a distinct stream id per consumer. Two consumers with the
//! same seed never share a stream, and adding a consumer never perturbs the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named stream families. Indexed families (one stream per image or per
/// network refresh) add their index to the base id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Outlier model fitting (subsampling, split draws).
    Fit,
    /// Network refresh decisions in the augmentation loop.
    Refresh,
    /// Weight distortion sampling and application for the `n`th network.
    Network(u64),
    /// Signal distortion sampling and masks for the `n`th image.
    Image(u64),
    /// Seeded random weight initialisation.
    WeightInit,
}

impl Stream {
    fn id(self) -> u64 {
        const FAMILY: u64 = 1 << 40;
        match self {
            Stream::Fit => 1,
            Stream::Refresh => 2,
            Stream::WeightInit => 3,
            Stream::Network(n) => FAMILY + n,
            Stream::Image(n) => 2 * FAMILY + n,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
