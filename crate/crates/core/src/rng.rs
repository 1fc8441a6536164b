//! Seed derivation and fixed-consumption Gaussian streams.
//!
//! Every draw comes from a ChaCha8 keystream. A stream consumes a fixed number
//! of 32-bit words per step, so step `i` of stream `(seed, stream)` always
//! starts at word `i * words_per_step` and can be regenerated on its own with
//! [`NormalStream::at_step`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replica `index` under `master`:
/// `splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15)` with wrapping arithmetic.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform on (0, 1], never zero, from the top 53 bits.
#[inline]
fn open_unit(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals in blocks of `dim`, `2 * ceil(dim / 2)` 64-bit draws per block
/// (Box-Muller, both outputs used).
pub struct NormalStream {
    rng: ChaCha8Rng,
    dim: usize,
    pairs: usize,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            dim,
            pairs: dim.div_ceil(2),
        }
    }

    /// Stream positioned at the start of block `step`.
    pub fn at_step(seed: u64, stream: u64, dim: usize, step: u64) -> Self {
        let mut s = Self::new(seed, stream, dim);
        s.rng
            .set_word_pos(step as u128 * s.words_per_step() as u128);
        s
    }

    pub fn words_per_step(&self) -> usize {
        4 * self.pairs
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for p in 0..self.pairs {
            let u1 = open_unit(self.rng.next_u64());
            let u2 = open_unit(self.rng.next_u64());
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[2 * p] = r * c;
            if 2 * p + 1 < self.dim {
                out[2 * p + 1] = r * s;
            }
        }
    }
}

/// One normal and one uniform per step, for the pursuit engine. The normal
/// pair from Box-Muller is split across two consecutive steps.
pub struct PursuitStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl PursuitStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    #[inline]
    pub fn next_step(&mut self) -> (f64, f64) {
        let normal = match self.spare.take() {
            Some(z) => z,
            None => {
                let u1 = open_unit(self.rng.next_u64());
                let u2 = open_unit(self.rng.next_u64());
                let r = (-2.0 * u1.ln()).sqrt();
                let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
                self.spare = Some(r * s);
                r * c
            }
        };
        let uniform = open_unit(self.rng.next_u64());
        (normal, uniform)
    }
}
