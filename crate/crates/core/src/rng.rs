//! Seed derivation and counter-addressed random streams.
//!
//! Every random quantity in the crate is derived from a single user seed and a
//! purpose label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a 64-bit sub-seed from `(seed, purpose)` by hashing.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A ChaCha generator dedicated to `purpose`.
pub fn stream(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}

/// A ChaCha generator positioned on sub-stream `index` of `purpose`.
///
/// Row `i` of the dyad randomness reads stream `i`.
pub fn indexed_stream(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut rng = stream(seed, purpose);
    rng.set_stream(index);
    rng
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
