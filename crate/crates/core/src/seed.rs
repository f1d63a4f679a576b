use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over a byte stream. Stable across platforms and releases, unlike
/// `std::hash`.
pub(crate) fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for byte in part.iter() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so ("ab","c") and ("a","bc") differ
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic RNG for a (seed, label) pair.
pub(crate) fn rng_for(seed: u64, label: &[&[u8]]) -> ChaCha8Rng {
    let mut parts: Vec<&[u8]> = Vec::with_capacity(label.len() + 1);
    let seed_bytes = seed.to_le_bytes();
    parts.push(&seed_bytes);
    parts.extend_from_slice(label);
    ChaCha8Rng::seed_from_u64(fnv1a(&parts))
}
