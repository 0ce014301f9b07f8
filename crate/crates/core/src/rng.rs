//! Labeled random streams.
//!
//! Every stochastic consumer draws from its own stream derived from the run
//! seed and a label, so adding a consumer never shifts another one's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// Stream for the `index`-th member of a family (trial, grid cell, ...).
pub fn substream(seed: u64, label: &str, index: u64) -> StreamRng {
    stream(seed, &format!("{label}#{index}"))
}
