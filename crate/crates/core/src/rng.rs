//! Counter-based random streams.
//!
//! Every random entity (a target neuron during sampling, a Poisson source,
//! a neuron drawing parameter variations) reads from its own ChaCha stream
//! keyed by `(seed, domain)` and selected by the entity index. Results are
//! therefore independent of iteration order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    key: [u8; 32],
}

impl StreamFamily {
    pub fn new(seed: u64, domain: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update((domain.len() as u64).to_le_bytes());
        hasher.update(domain.as_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&hasher.finalize());
        Self { key }
    }

    pub fn stream(&self, entity: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(entity);
        rng
    }
}

pub fn stream(seed: u64, domain: &str, entity: u64) -> ChaCha8Rng {
    StreamFamily::new(seed, domain).stream(entity)
}
