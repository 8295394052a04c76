use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two 64-bit words.
pub fn mix(seed: u64, value: u64) -> u64 {
    splitmix64(seed ^ splitmix64(value))
}

/// A replayable random stream addressed by a path of (stage, outer-index)
/// hops from a root seed. Only the folded seed is stored, so the value is
/// `Copy`; the depth is kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStream {
    root_seed: u64,
    seed: u64,
    depth: usize,
}

impl SeededStream {
    pub fn new(root_seed: u64) -> Self {
        SeededStream {
            root_seed,
            seed: splitmix64(root_seed),
            depth: 0,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn child(&self, stage: usize, index: usize) -> SeededStream {
        SeededStream {
            root_seed: self.root_seed,
            seed: mix(mix(self.seed, stage as u64), index as u64),
            depth: self.depth + 1,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// First uniform draw in [0, 1) of this stream.
    pub fn uniform(&self) -> f64 {
        self.rng().random::<f64>()
    }
}
