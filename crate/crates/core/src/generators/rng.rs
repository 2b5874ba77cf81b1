//! The one random stream every generator draws from.
//!
//! SplitMix64 seeded with the raw seed as its state, uniforms from the top
//! 53 bits, Box-Muller normals (cosine branch only, two uniforms each) and
//! Student t as a normal over `sqrt(chi2 / dof)` with the chi-square built
//! from `dof` squared normals. Every draw is spelled out so the stream can
//! be reproduced bit for bit outside Rust.

use std::f64::consts::TAU;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: SplitMix64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { inner: SplitMix64::seed_from_u64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Student t with `dof` degrees of freedom.
    pub fn student_t(&mut self, dof: usize) -> f64 {
        let z = self.normal();
        let chi2: f64 = (0..dof).map(|_| self.normal().powi(2)).sum();
        z / (chi2 / dof as f64).sqrt()
    }
}
