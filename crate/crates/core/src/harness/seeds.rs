//! Named random streams derived from one master seed.
//!
//! Each stream is seeded with SHA-256 of the master seed and the stream name,
//! so streams are independent of each other and of the order in which they
//! are requested.

use rand::SeedableRng;
use sha2::{Digest, Sha256};

use crate::StreamRng;

pub const ENV: &str = "env";
pub const ACTOR_INIT: &str = "actor-init";
pub const CRITIC_INIT: &str = "critic-init";
pub const SELECTOR_INIT: &str = "selector-init";
pub const DROPOUT: &str = "dropout";
pub const EXPLORATION: &str = "exploration";
pub const BUFFER: &str = "buffer-sampling";
pub const EVAL: &str = "eval";
pub const TARGET: &str = "target";
pub const SELECTOR: &str = "selector";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        SeedStreams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        StreamRng::from_seed(seed)
    }

    /// Stream of the `i`-th teacher (zero-based).
    pub fn teacher(&self, i: usize) -> StreamRng {
        self.stream(&format!("teacher[{i}]"))
    }
}
