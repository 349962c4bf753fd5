//! Master-seed stream splitting.
//!
//! One experiment seed expands into independent named RNG streams so that a
//! configuration change in one component (say, PPO sampling) never shifts the
//! draws seen by another (say, renewable deviations). Every stream is a
//! `ChaCha8Rng` seeded with the master seed and routed to its own ChaCha
//! stream id, derived from the name by FNV-1a.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic 64-bit FNV-1a over the stream name.
fn fnv1a(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Splits one master seed into independent named streams.
#[derive(Debug, Clone, Copy)]
pub struct SeedSplitter {
    master: u64,
}

impl SeedSplitter {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Returns the stream registered under `name`. Same (seed, name) pair,
    /// same sequence of draws — forever.
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(fnv1a(name));
        rng
    }

    /// Convenience for per-agent streams ("agent-explore-3" and friends).
    pub fn indexed_stream(&self, prefix: &str, index: usize) -> ChaCha8Rng {
        self.stream(&format!("{prefix}-{index}"))
    }
}
