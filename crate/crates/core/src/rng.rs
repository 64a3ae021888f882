//! Seeded random number generation.
//!
//! Every stochastic component draws from [`Rng`], a xoshiro256++ generator.
//! Seeds are expanded with splitmix64 (the `seed_from_u64` path of
//! `rand_xoshiro`), so a `(seed, stream)` pair gives the same sequence on every
//! platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// splitmix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `base`.
///
/// Used wherever work is split across threads so that results do not depend on
/// scheduling order.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

pub fn stream(base: u64, stream: u64) -> Rng {
    seeded(stream_seed(base, stream))
}
