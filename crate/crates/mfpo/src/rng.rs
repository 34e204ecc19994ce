//! Counter-based deterministic random number generation.
//!
//! Every random quantity in the pipeline — diffusion noise, feature
//! projections, shuffles, synthetic data — is a pure function of
//! `(seed, key, counter)`. There is no mutable generator state, so results
//! are reproducible across runs and insensitive to evaluation order, and
//! parallel callers can draw from disjoint streams without coordination.
//!
//! The generator is a SplitMix64-style avalanche mix of the input words;
//! normals come from Box–Muller on two counter draws.

use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream keys separating the independent consumers of the generator.
pub mod stream {
    pub const NOISE: u64 = 0x01;
    pub const TEXT_FEATURES: u64 = 0x02;
    pub const RESPONSE_FEATURES: u64 = 0x03;
    pub const WORD_EMBEDDING: u64 = 0x04;
    pub const SHUFFLE: u64 = 0x05;
    pub const PARAM_INIT: u64 = 0x06;
    pub const SYNTH: u64 = 0x07;
}

/// SplitMix64 finalizer: full-avalanche 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine two words into a derived stream key.
#[inline]
pub fn compose_key(a: u64, b: u64) -> u64 {
    mix64(a.wrapping_mul(GOLDEN) ^ mix64(b))
}

/// Mixed 64-bit word for the tuple `(seed, key, counter, salt)`.
#[inline]
pub fn counter_u64(seed: u64, key: u64, counter: u64, salt: u64) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    h = mix64(h ^ key);
    h = mix64(h.wrapping_add(counter.wrapping_mul(GOLDEN)));
    mix64(h ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Uniform draw in the open interval (0, 1).
#[inline]
pub fn unit_open(seed: u64, key: u64, counter: u64, salt: u64) -> f64 {
    // 53 mantissa bits, offset by half an ulp so 0.0 and 1.0 are unreachable.
    ((counter_u64(seed, key, counter, salt) >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box–Muller on two counter draws.
#[inline]
pub fn normal(seed: u64, key: u64, counter: u64) -> f64 {
    let u1 = unit_open(seed, key, counter, 0);
    let u2 = unit_open(seed, key, counter, 1);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Uniform draw in `[lo, hi)`.
#[inline]
pub fn uniform(seed: u64, key: u64, counter: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_open(seed, key, counter, 2)
}

/// Integer draw in `[0, n)`. Modulo bias is negligible for the small `n`
/// used here (n << 2^32).
#[inline]
pub fn index(seed: u64, key: u64, counter: u64, n: usize) -> usize {
    debug_assert!(n > 0);
    (counter_u64(seed, key, counter, 3) % n as u64) as usize
}

/// Fisher–Yates permutation of `0..n` keyed by `(seed, key)`.
pub fn permutation(seed: u64, key: u64, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (counter_u64(seed, key, i as u64, 4) % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}

/// FNV-1a hash of a string. Used wherever a stable word/id key is needed;
/// `std`'s hasher is randomly seeded and unusable for reproducibility.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
