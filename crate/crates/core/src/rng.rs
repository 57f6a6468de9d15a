//! Seekable Gaussian streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit replica key and
//! selected by a stream id. A step always consumes the same number of words,
//! so any (stream, step) can be reached by seeking.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids. W1 drives the fast variable, W2 the slow one, WTILDE the
/// extra limit noise, FROZEN the frozen-process samplers.
pub mod stream {
    pub const W1: u64 = 1;
    pub const W2: u64 = 2;
    pub const WTILDE: u64 = 3;
    pub const FROZEN: u64 = 4;
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a list of words into one key.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Key for one replica at one grid level.
pub fn replica_key(master: u64, level: u64, replica: u64) -> u64 {
    derive_key(&[master, level, replica])
}

fn seed_bytes(key: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut z = key;
    for chunk in out.chunks_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    out
}

/// Uniform on the open interval (0, 1) with 53 random bits.
#[inline]
fn open_unit(u: u64) -> f64 {
    ((u >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normals, `dim` per step, addressable by step.
#[derive(Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    dim: usize,
    pairs: usize,
    sign: f64,
}

impl NormalStream {
    pub fn new(key: u64, stream_id: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(key));
        rng.set_stream(stream_id);
        NormalStream {
            rng,
            dim,
            pairs: dim.div_ceil(2),
            sign: 1.0,
        }
    }

    /// Flips every draw (antithetic partner).
    pub fn antithetic(mut self, flip: bool) -> Self {
        self.sign = if flip { -1.0 } else { 1.0 };
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Positions the stream so the next `fill` returns step `step`.
    pub fn seek(&mut self, step: u64) {
        // two u64 (four 32-bit words) per Box-Muller pair
        self.rng.set_word_pos(step as u128 * self.pairs as u128 * 4);
    }

    /// Writes the next step's `dim` standard normals.
    pub fn fill(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut k = 0;
        for _ in 0..self.pairs {
            let u1 = open_unit(self.rng.next_u64());
            let u2 = open_unit(self.rng.next_u64());
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[k] = self.sign * r * c;
            if k + 1 < self.dim {
                out[k + 1] = self.sign * r * s;
            }
            k += 2;
        }
    }

    /// Like `fill` but scales by `scale` (e.g. sqrt(dt)).
    pub fn fill_scaled(&mut self, scale: f64, out: &mut [f64]) {
        self.fill(out);
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut v = [0.0];
        self.fill(&mut v);
        v[0]
    }
}
