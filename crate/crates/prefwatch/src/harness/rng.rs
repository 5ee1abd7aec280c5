//! Deterministic stream derivation: every random draw in a run comes from a
//! ChaCha stream keyed by (condition hash, seed, role), so reruns are
//! byte-identical and the learner, environment, and predictor never share
//! randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Learner,
    Environment,
    Predictor,
}

impl StreamRole {
    fn label(self) -> &'static str {
        match self {
            StreamRole::Learner => "learner",
            StreamRole::Environment => "environment",
            StreamRole::Predictor => "predictor",
        }
    }
}

/// Derive the RNG for one role of one seeded run.
pub fn derive_rng(condition_hash: &str, seed: u64, role: StreamRole) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(condition_hash.as_bytes());
    hasher.update(b":");
    hasher.update(seed.to_le_bytes());
    hasher.update(b":");
    hasher.update(role.label().as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}
