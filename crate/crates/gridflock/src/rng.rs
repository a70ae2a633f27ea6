//! Counter-based deterministic random numbers.
//!
//! Stochastic link effects (multiplicative noise) must reproduce
//! bit-identically across runs and be independent of the order in which
//! the engine happens to evaluate links. Instead of a stateful generator,
//! every draw is a pure hash of `(seed, receiver, sender, draw index)`,
//! so the same logical sample always yields the same value.

/// Finalizing mixer from the splitmix64 generator.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a keyed counter into 64 uniformly distributed bits.
pub fn hash_draw(seed: u64, receiver: u64, sender: u64, counter: u64) -> u64 {
    let mut h = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = mix(h ^ receiver.wrapping_mul(0xff51_afd7_ed55_8ccd));
    h = mix(h ^ sender.wrapping_mul(0xc4ce_b9fe_1a85_ec53));
    h = mix(h ^ counter);
    mix(h)
}

/// Maps 64 random bits onto `[0, 1)` with 53-bit resolution.
pub fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic draw from `Uniform(-amplitude, +amplitude)`.
pub fn uniform_symmetric(
    seed: u64,
    receiver: u64,
    sender: u64,
    counter: u64,
    amplitude: f64,
) -> f64 {
    let u = unit_from_bits(hash_draw(seed, receiver, sender, counter));
    amplitude * (2.0 * u - 1.0)
}
