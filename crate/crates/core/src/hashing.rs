//! Stable 64-bit hashing used for shingles, n-gram context keys and seed
//! derivation. `std`'s `DefaultHasher` is deliberately avoided: its output is
//! not guaranteed across releases, and artifact bytes must not depend on the
//! compiler version.

use sha2::{Digest, Sha256};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over a sequence of already-hashed words, with a length tag so that
/// `["ab", "c"]` and `["a", "bc"]` cannot collide trivially.
pub fn fnv1a64_words(words: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for w in words {
        for &b in w.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        // word separator; 0x1f never appears in tokenized text
        h ^= 0x1f;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer; good avalanche for seed derivation.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a per-stage seed from the single top-level run seed. Every source
/// of randomness in the pipeline flows through this so that one `seed` key in
/// the config pins the whole run.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    mix64(master ^ fnv1a64(label.as_bytes()))
}

/// Hex-encoded SHA-256, used for artifact checksums and cache sidecars.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_file(path: &std::path::Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
