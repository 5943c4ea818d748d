//! Seeded randomness.
//!
//! Every random choice in this crate flows from a caller-supplied `u64` seed
//! through [`seeded_rng`]. Distinct components derive their own streams with
//! [`derive_seed`], which hashes a component name into the seed (FNV-1a, so
//! the derivation is stable across platforms and releases). One global seed
//! therefore reproduces an entire experiment bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The deterministic generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Builds the crate's standard generator from a bare seed.
pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a component-specific seed from a global seed.
///
/// FNV-1a over the seed's little-endian bytes followed by the component name.
pub fn derive_seed(global: u64, component: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

    let mut h = FNV_OFFSET;
    for byte in global.to_le_bytes().iter().chain(component.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
