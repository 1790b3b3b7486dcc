//! Counter-based random streams.
//!
//! Every random quantity is a pure function of a [`StreamKey`]: the ChaCha8
//! key is built from `(master_seed, sample_index, lane)`, so a sample's draws
//! do not depend on which worker produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tree topology of a directly sampled cluster.
pub const LANE_TREE: u32 = 0;
/// Decomposition stages.
pub const LANE_DECOMPOSITION: u32 = 1;
/// Second stage of the regeneration construction.
pub const LANE_REGENERATION: u32 = 2;
/// Continuity jitter for tail-index estimation on integer data.
pub const LANE_JITTER: u32 = 3;
/// Pareto weights of limiting-measure estimators; one lane per type.
pub const LANE_MEASURE_BASE: u32 = 1 << 16;
/// Per-`(generation, parent type)` draw tapes used for coupled replays.
pub const LANE_TAPE_BASE: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub sample_index: u64,
    pub lane: u32,
}

impl StreamKey {
    pub fn new(master_seed: u64, sample_index: u64, lane: u32) -> Self {
        StreamKey {
            master_seed,
            sample_index,
            lane,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.sample_index.to_le_bytes());
        seed[16..20].copy_from_slice(&self.lane.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }

    pub fn with_lane(self, lane: u32) -> Self {
        StreamKey { lane, ..self }
    }
}

/// Seed family for one experiment; derives independent master seeds for its
/// sub-experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub fn derive(self, tag: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x51ED_270B_0F37_A5C1))))
    }

    /// Derive from a textual tag (FNV-1a of the bytes).
    pub fn derive_str(self, tag: &str) -> Seed {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.derive(h)
    }

    pub fn key(self, sample_index: u64, lane: u32) -> StreamKey {
        StreamKey::new(self.0, sample_index, lane)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
