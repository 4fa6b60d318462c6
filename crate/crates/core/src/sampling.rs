//! Counter-based random streams.
//!
//! Sample `k` of a run with seed `s` is always drawn from the ChaCha8 stream
//! `(s, k)`, so results never depend on evaluation order or thread count.

use crate::num::{norm2, sqrt};
use crate::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Independent generator for `(seed, index)`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Stream { rng }
}

pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.next_u64() % n
    }

    /// Standard normal deviate (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                let v = self.uniform();
                return sqrt(-2.0 * libm::log(u)) * libm::cos(2.0 * core::f64::consts::PI * v);
            }
        }
    }

    /// Uniform direction on the unit sphere in `R^n`.
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.normal()).collect();
            let r = norm2(&v);
            if r > 1e-12 {
                return v.into_iter().map(|x| x / r).collect();
            }
        }
    }

    /// Uniform point in the Euclidean ball of radius `radius` around `center`.
    pub fn in_ball(&mut self, center: &[f64], radius: f64) -> Vec<f64> {
        let n = center.len();
        let u = self.unit_vector(n);
        let r = radius * libm::pow(self.uniform(), 1.0 / n.max(1) as f64);
        center.iter().zip(u).map(|(c, x)| c + r * x).collect()
    }
}

/// Point `k` of the uniform ball sample for `seed`.
pub fn ball_point(seed: u64, k: u64, center: &[f64], radius: f64) -> Vec<f64> {
    stream(seed, k).in_ball(center, radius)
}
