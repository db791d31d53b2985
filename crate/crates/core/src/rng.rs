//! Seed handling.
//!
//! Every random draw in the crate flows from a single root seed. Sub-seeds are
//! derived as the first eight bytes (little endian) of
//! `SHA-256(root_seed.to_le_bytes() || label)`, so two components never share
//! a stream unless they share a label. Per-item streams (one generator group,
//! one training step) use ChaCha8 with the item index as the stream number,
//! which makes any item reproducible without replaying its predecessors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives a labelled sub-seed from `root`.
pub fn sub_seed(root: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Generator seeded directly from `seed`.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counter-based generator: the stream for item `index` under `seed`.
pub fn keyed(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
