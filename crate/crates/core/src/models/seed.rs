//! Deterministic per-replicate random streams.
//!
//! Every replicate of every experiment owns one substream derived from
//! `(master_seed, experiment_id, replicate)`. Draws never depend on which
//! worker runs the replicate, so results are identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// The generator behind every substream.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub experiment_id: String,
    pub replicate: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, experiment_id: impl Into<String>, replicate: u64) -> Self {
        Self {
            master_seed,
            experiment_id: experiment_id.into(),
            replicate,
        }
    }

    /// Same experiment, different replicate.
    pub fn with_replicate(&self, replicate: u64) -> Self {
        Self {
            replicate,
            ..self.clone()
        }
    }

    /// `splitmix64(master ^ (replicate + 1) * GOLDEN_GAMMA ^ fnv1a64(id))`.
    pub fn substream_seed(&self) -> u64 {
        let mixed = self.master_seed
            ^ self.replicate.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)
            ^ fnv1a64(self.experiment_id.as_bytes());
        splitmix64(mixed)
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.substream_seed())
    }
}

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}
