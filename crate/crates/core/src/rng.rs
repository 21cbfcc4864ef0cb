//! Random number streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha::ChaCha20Rng`). A
//! stream is identified by a run seed, a domain tag and a key; the seed and
//! domain select the ChaCha key, the key selects the ChaCha stream. Streams
//! with different keys never overlap, which lets scenario `j` be regenerated
//! on its own regardless of how work is split between threads.
//!
//! Normal variates use the polar-free Box–Muller transform on uniforms in
//! `(0, 1]` built from the top 53 bits of a 64-bit draw.

use core::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

/// Human-readable description recorded in output metadata.
pub const GENERATOR_NAME: &str = "ChaCha20 (rand_chacha 0.9) + Box-Muller";

/// Domain tags separating independent uses of the same run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Scenarios = 0x5343_454e,
    Training = 0x5452_4149,
    Validation = 0x5641_4c49,
    Init = 0x494e_4954,
    Deaths = 0x4445_4154,
    Evaluation = 0x4556_414c,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one 64-bit key.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// A uniform/normal sampler over one ChaCha20 stream.
#[derive(Clone)]
pub struct Stream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, domain: Domain, key: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(mix(&[seed, domain as u64]));
        rng.set_stream(key);
        Self { rng, spare: None }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            // keep the stream position independent of p
            let _ = self.uniform();
            return false;
        }
        self.uniform() <= p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
