//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`Rng`], a thin wrapper over
//! ChaCha8 (`rand_chacha::ChaCha8Rng`). ChaCha is specified at the bit level,
//! so a given seed produces the same stream on every platform.
//!
//! Streams are split by ChaCha's 64-bit stream id: `Rng::new(seed).split(id)`
//! keeps the key derived from `seed` and switches to stream `id`. The CLI
//! derives all subsystem generators from one `--seed` this way (see
//! [`streams`]).
//!
//! Uniform reals use the top 53 bits of a `u64` draw, giving a value in
//! `[0, 1)`. Gaussian draws use the Box-Muller transform on two uniforms
//! `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`: `sqrt(-2 ln u1) · cos(2π u2)`. Only the
//! cosine branch is used, so each Gaussian consumes exactly two `u64` draws.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used when splitting a master seed.
pub mod streams {
    pub const NOISE: u64 = 1;
    pub const DICTIONARY_INIT: u64 = 2;
    pub const POWER_ITERATION: u64 = 3;
    pub const SAMPLER: u64 = 4;
    pub const ATOM_REFRESH: u64 = 5;
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh generator on stream `stream` of the same seed, positioned at the
    /// start of that stream. Independent of how far `self` has advanced.
    pub fn split(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Rng {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
