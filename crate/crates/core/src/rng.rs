//! Deterministic, splittable random streams.
//!
//! Every run owns one root seed. Streams are derived by hashing the root
//! with a path of labels (episode, stage, purpose) through SplitMix64 and
//! seeding a ChaCha8 generator with the result. A stream therefore depends
//! only on its path, never on how many draws other streams have made, which
//! keeps simulations bit-reproducible across thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: u64,
}

/// Labels separating independent purposes under the same parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Episode = 1,
    Stage = 2,
    Initial = 3,
    Instance = 4,
    ModelClass = 5,
    Adversary = 6,
    Behavior = 7,
}

impl SeedTree {
    pub fn new(root_seed: u64) -> Self {
        SeedTree {
            key: mix64(root_seed.wrapping_add(GOLDEN)),
        }
    }

    /// Derive a child node.
    pub fn child(&self, purpose: Purpose, index: u64) -> Self {
        let a = mix64(self.key ^ (purpose as u64).wrapping_mul(GOLDEN));
        SeedTree {
            key: mix64(a.wrapping_add(index).wrapping_mul(GOLDEN) ^ a.rotate_left(17)),
        }
    }

    pub fn episode(&self, t: usize) -> Self {
        self.child(Purpose::Episode, t as u64)
    }

    pub fn stage(&self, h: usize) -> Self {
        self.child(Purpose::Stage, h as u64)
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
