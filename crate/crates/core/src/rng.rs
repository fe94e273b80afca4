//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`ChaCha8Rng`]. A run is keyed
//! by a 64-bit seed; independent consumers inside a run (one per factor, the
//! observation sampler, the ALS initializer, ...) take separate streams of the
//! same key so that adding draws to one never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use rand_chacha::ChaCha8Rng as Rng;

/// Well-known stream ids.
pub mod streams {
    pub const FACTORS: u64 = 0;
    pub const OBSERVATIONS: u64 = 1 << 32;
    pub const GROUND_TRUTH: u64 = 2 << 32;
    pub const ALS: u64 = 3 << 32;
    pub const MONTE_CARLO: u64 = 4 << 32;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect()
}
