//! Seeded generator streams. Every random draw in the crate goes through a
//! `(seed, stream)` pair so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Number of points generated per independent stream when work is chunked.
pub const CHUNK: usize = 1 << 14;

/// Smallest distance kept from {0, 1} when drawing unit-space coordinates.
pub const UNIT_CLIP: f64 = 1e-15;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a textual key.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Uniform draw on `[UNIT_CLIP, 1 - UNIT_CLIP]`.
#[inline]
pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>().clamp(UNIT_CLIP, 1.0 - UNIT_CLIP)
}
