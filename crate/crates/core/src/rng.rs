//! Counter-based Gaussian streams.
//!
//! Every draw is a pure function of `(seed, realization, site, lane)`, so an
//! ensemble comes out identical whether realizations run serially, in
//! parallel, or in any order.

use std::f64::consts::TAU;

/// Finalizer from SplitMix64; a bijective 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Uniform 64-bit word for a given counter tuple.
#[inline]
pub fn counter_u64(seed: u64, realization: u64, site: u64, lane: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN_GAMMA));
    h = mix64(h ^ realization.wrapping_mul(GOLDEN_GAMMA));
    h = mix64(h ^ site.wrapping_add(0x632b_e59b_d9b4_e019));
    mix64(h ^ lane.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Uniform draw in the open interval (0, 1).
#[inline]
pub fn counter_uniform(seed: u64, realization: u64, site: u64, lane: u64) -> f64 {
    // 53 random bits, offset by half an ulp so 0 is never produced.
    ((counter_u64(seed, realization, site, lane) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller, cosine branch).
#[inline]
pub fn counter_normal(seed: u64, realization: u64, site: u64, stream: u64) -> f64 {
    let u1 = counter_uniform(seed, realization, site, 2 * stream);
    let u2 = counter_uniform(seed, realization, site, 2 * stream + 1);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// `n` independent `N(0, sigma^2)` draws for one realization.
pub fn gaussian_vector(seed: u64, realization: u64, n: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    (0..n).map(|i| sigma * counter_normal(seed, realization, i as u64, 0)).collect()
}

/// Derive an independent seed for a named sub-stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(tag.wrapping_add(GOLDEN_GAMMA)))
}
