//! Seed fan-out. Every stage derives its own stream from the single run seed
//! so that changing one stage never shifts the randomness of another.

use sha2::{Digest, Sha256};

/// Derive a stage-specific 64-bit seed from the run seed and a stage tag.
pub fn derive(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
