//! Reproducible random streams.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] keyed by a
//! master seed and positioned on one of its 2^64 independent streams. The
//! stream index is a hash of a short path of integers (for example
//! `[sample, trial]`), so a trial's randomness depends only on where it sits
//! in the experiment and never on which worker ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator type handed to every sampling routine.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Handle from which independent, addressable streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream addressed by `path`. Distinct paths give statistically
    /// independent streams; the same path always gives the same stream.
    pub fn stream(&self, path: &[u64]) -> Stream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_index(path));
        rng
    }

    /// A child factory whose streams do not overlap with this one's.
    pub fn child(&self, tag: u64) -> StreamFactory {
        StreamFactory {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0xA5A5_A5A5))),
        }
    }
}

fn stream_index(path: &[u64]) -> u64 {
    // length is mixed in so that [] / [0] / [0, 0] are all distinct
    let mut h = splitmix64(path.len() as u64);
    for &p in path {
        h = splitmix64(h ^ p.wrapping_mul(GOLDEN));
    }
    h
}

/// Well-known path tags so that different consumers of one master seed never
/// share a stream.
pub mod tags {
    pub const TRAINING: u64 = 1;
    pub const TEST_SAMPLES: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const TRIALS: u64 = 4;
    pub const MOMENTS: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let f = StreamFactory::new(42);
        let a: Vec<u64> = f.stream(&[3, 7]).random_iter().take(8).collect();
        let b: Vec<u64> = f.stream(&[3, 7]).random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_paths_differ() {
        let f = StreamFactory::new(42);
        let paths: [&[u64]; 5] = [&[], &[0], &[0, 0], &[3, 7], &[7, 3]];
        let firsts: Vec<u64> = paths.iter().map(|p| f.stream(p).random()).collect();
        for i in 0..firsts.len() {
            for j in i + 1..firsts.len() {
                assert_ne!(firsts[i], firsts[j], "{:?} vs {:?}", paths[i], paths[j]);
            }
        }
    }

    #[test]
    fn child_factories_are_distinct() {
        let f = StreamFactory::new(1);
        assert_ne!(f.child(1).seed(), f.child(2).seed());
        assert_ne!(f.child(1).seed(), f.seed());
    }
}
