//! Counter-based deterministic random streams.
//!
//! Each draw is a pure function of its key, so consumers can be evaluated in
//! any order (or in parallel) and still reproduce the same values. This is
//! what makes subsampling independent of the work schedule.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapses a key tuple into a single well-mixed word.
#[inline]
pub fn mix_key(parts: &[u64]) -> u64 {
    let mut h = 0x6a09_e667_f3bc_c909u64; // sqrt(2) fraction, arbitrary non-zero start
    for (i, &p) in parts.iter().enumerate() {
        h = mix(
            h ^ mix(p.wrapping_add(GAMMA.wrapping_mul(i as u64 + 1))),
        );
    }
    h
}

/// Uniform draw in [0, 1) keyed by `parts`.
#[inline]
pub fn unit_f64(parts: &[u64]) -> f64 {
    // 53 high bits give the usual dyadic grid on [0, 1).
    (mix_key(parts) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
