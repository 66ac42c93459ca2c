//! Deterministic, label-addressed RNG substreams.
//!
//! Every stochastic task in the crate draws from a stream derived from
//! `(master seed, label, indices)` by hashing, never from shared mutable RNG
//! state. Two tasks with different labels get statistically independent
//! streams, and the same task always gets the same stream regardless of how
//! many worker threads the caller uses. This is what makes benchmark CSVs
//! byte-identical across `--threads` settings.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A cheap counter-based RNG stream, independent per `(seed, label, idx)`.
pub fn substream(seed: u64, label: &str, idx: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for &i in idx {
        hasher.update(i.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw from the open interval (0, 1).
///
/// `gen::<f64>()` yields [0, 1); zero is rejected so samplers may take
/// logarithms without a guard.
pub fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// One standard normal draw.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// A fair sign, +1.0 or -1.0.
pub fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}
