//! Deterministic seed derivation.
//!
//! Every replicate, diagnostic point, and quadrature run draws its
//! randomness from a seed derived by a counter-based hash of the master seed
//! and the item's identity. Adding an algorithm or changing the thread count
//! therefore never perturbs the samples seen by other cells.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; bijective on u64.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for one experiment cell, keyed by algorithm name, sample size, and
/// replicate index.
pub fn derive_seed(master: u64, label: &str, n: u64, replicate: u64) -> u64 {
    let mut h = splitmix64(master ^ fnv1a(label.as_bytes()));
    h = splitmix64(h ^ n.wrapping_mul(0x9e3779b97f4a7c15));
    splitmix64(h ^ replicate)
}

/// Child seed for a numbered sub-stream (per-point or per-round work).
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ index.wrapping_mul(0xd1342543de82ef95))
}
