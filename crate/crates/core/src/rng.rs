//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha with 8 rounds
//! (`rand_chacha::ChaCha8Rng`). The 256-bit key is the 64-bit seed in
//! little-endian byte order followed by 24 zero bytes, and the ChaCha stream id
//! is the [`Stream`] discriminant, so the projection matrix, the agent and the
//! environment of one run never share a sequence even when they share a seed.
//!
//! Uniform `f64` draws take the top 53 bits of a `u64` output and scale by
//! 2^-53 (rand's `StandardUniform`). Normal draws use the Box-Muller transform
//! in [`standard_normal_pair`].

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Projection = 1,
    Agent = 2,
    Environment = 3,
    Layout = 4,
}

pub fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

/// Two independent N(0, 1) samples from two uniform draws.
///
/// `u1` is taken from (0, 1] so the logarithm stays finite.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// SplitMix64 finaliser, used to derive per-episode seeds from a run seed.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
