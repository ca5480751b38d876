//! Deterministic stream derivation. Every random draw in the crate comes
//! from a ChaCha8 stream keyed by `(master_seed, task id, stream tag)`, so
//! results do not depend on execution order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags separating the independent per-episode substreams.
pub const STREAM_SAMPLE: u64 = 0x5341;
pub const STREAM_FADE: u64 = 0x4641;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit key by folding the parts through splitmix64.
pub fn derive_key(parts: &[u64]) -> u64 {
    let mut k = splitmix64(0x243F_6A88_85A3_08D3);
    for &p in parts {
        k = splitmix64(k ^ p);
    }
    k
}

/// Derive a stage seed from the master seed and an ASCII tag.
pub fn stage_seed(master_seed: u64, tag: &str) -> u64 {
    let mut parts = vec![master_seed];
    for chunk in tag.as_bytes().chunks(8) {
        let mut w = [0u8; 8];
        w[..chunk.len()].copy_from_slice(chunk);
        parts.push(u64::from_le_bytes(w));
    }
    derive_key(&parts)
}

/// ChaCha8 stream for `(master_seed, task_id, tag)`. The full 256-bit key is
/// expanded from the derived 64-bit key so distinct tuples get unrelated
/// streams.
pub fn stream(master_seed: u64, task_id: u64, tag: u64) -> ChaCha8Rng {
    let k0 = derive_key(&[master_seed, task_id, tag]);
    let mut seed = [0u8; 32];
    let mut k = k0;
    for word in seed.chunks_exact_mut(8) {
        k = splitmix64(k);
        word.copy_from_slice(&k.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Convenience for single-key streams (splits, subsamples, bootstrap).
pub fn seeded(seed: u64) -> ChaCha8Rng {
    stream(seed, 0, 0)
}
