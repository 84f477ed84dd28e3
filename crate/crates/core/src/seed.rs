//! Deterministic seeding.
//!
//! Every random draw in a simulation comes from a generator keyed by
//! `(master seed, index path, stream label)`. Indices are mixed with
//! SplitMix64 and labels are hashed with FNV-1a, so the stream a trial sees
//! does not depend on scheduling or on which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(u64);

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        StreamSeed(splitmix64(master))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Child seed for an index (sweep point, trial, user, ...).
    pub fn derive(self, index: u64) -> Self {
        StreamSeed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(GOLDEN))))
    }

    /// Child seed for a named stream.
    pub fn labeled(self, label: &str) -> Self {
        StreamSeed(splitmix64(self.0 ^ fnv1a(label)))
    }

    /// Generator for the named stream under this node.
    pub fn rng(self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.labeled(label).0)
    }

    /// Convenience for the common `(master, trial, label)` triple.
    pub fn trial_rng(master: u64, trial: u64, label: &str) -> ChaCha8Rng {
        StreamSeed::new(master).derive(trial).rng(label)
    }
}
