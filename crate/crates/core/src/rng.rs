//! Seeded, shardable random streams.
//!
//! A [`Stream`] is a xoshiro256++ generator seeded from a 64-bit seed via
//! SplitMix64 and then advanced by `shard` calls to `jump()`. Each jump moves
//! the state forward by 2^128 draws, so shards are non-overlapping substreams
//! of one long sequence and need no coordination between workers.
//!
//! Primitive samplers:
//! - uniforms on the open interval (0, 1) (`rand::distr::Open01`);
//! - normals by the ziggurat method (`rand_distr::StandardNormal`);
//! - standard exponentials by the ziggurat method (`rand_distr::Exp1`);
//! - inverse Gaussians by the Michael–Schucany–Haas transformation.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Exp1, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{ensure, Result};

#[derive(Clone, Debug)]
pub struct Stream {
    seed: u64,
    shard: u64,
    rng: Xoshiro256PlusPlus,
}

/// Equivalent to [`Stream::new`].
pub fn create_stream(seed: u64, shard: u64) -> Stream {
    Stream::new(seed, shard)
}

impl Stream {
    /// Stream number `shard` of the family rooted at `seed`.
    ///
    /// Cost is linear in `shard`; use [`Stream::next_shard`] to walk a
    /// contiguous range of shards.
    pub fn new(seed: u64, shard: u64) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..shard {
            rng.jump();
        }
        Self { seed, shard, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shard(&self) -> u64 {
        self.shard
    }

    /// The stream for `shard + 1`. Jumps from the current state, so it is
    /// only the true next shard when called before any draws.
    pub fn next_shard(&self) -> Self {
        let mut rng = self.rng.clone();
        rng.jump();
        Self {
            seed: self.seed,
            shard: self.shard + 1,
            rng,
        }
    }

    /// Uniform draw strictly inside (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// N(mu, sigma^2). `sigma == 0` returns `mu` exactly without consuming
    /// a draw.
    pub fn normal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        ensure(sigma >= 0.0, || format!("normal sigma must be >= 0, got {sigma}"))?;
        if sigma == 0.0 {
            return Ok(mu);
        }
        Ok(mu + sigma * self.std_normal())
    }

    /// Standard exponential, i.e. `-ln V` for uniform `V`.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// IG(mean, shape) draw, always strictly positive.
    pub fn inverse_gaussian(&mut self, mean: f64, shape: f64) -> Result<f64> {
        ensure(mean > 0.0 && mean.is_finite(), || {
            format!("inverse Gaussian mean must be > 0, got {mean}")
        })?;
        ensure(shape > 0.0 && shape.is_finite(), || {
            format!("inverse Gaussian shape must be > 0, got {shape}")
        })?;
        Ok(self.inverse_gaussian_unchecked(mean, shape))
    }

    pub(crate) fn inverse_gaussian_unchecked(&mut self, mean: f64, shape: f64) -> f64 {
        let v = self.std_normal();
        let y = mean * v * v;
        // Smaller root of the quadratic, written without the cancellation in
        // `mean + mean/(2 shape) * (y - sqrt(y^2 + 4 shape y))`.
        let root = y + (y * y + 4.0 * shape * y).sqrt();
        let x = if root > 0.0 {
            mean * 4.0 * shape * y / (root * root)
        } else {
            mean
        };
        let x = x.max(f64::MIN_POSITIVE);
        if self.uniform() * (mean + x) <= mean {
            x
        } else {
            mean * mean / x
        }
    }

    /// First-passage time of a Brownian motion with drift `mu >= 0` and
    /// volatility `sigma` to a level `distance > 0` above its start.
    ///
    /// IG(distance/mu, distance^2/sigma^2) for `mu > 0`, and the Lévy law
    /// `distance^2 / (sigma^2 Z^2)` for `mu == 0`.
    pub(crate) fn first_passage_time(&mut self, distance: f64, mu: f64, sigma: f64) -> f64 {
        debug_assert!(distance > 0.0 && mu >= 0.0 && sigma > 0.0);
        let shape = (distance / sigma) * (distance / sigma);
        if mu == 0.0 {
            let z = self.std_normal();
            shape / (z * z)
        } else {
            self.inverse_gaussian_unchecked(distance / mu, shape)
        }
    }

    /// Euclidean norm of `center * e1 + scale * Z` for a standard 3D normal
    /// vector `Z`.
    #[inline]
    pub(crate) fn norm3_from(&mut self, center: f64, scale: f64) -> f64 {
        let a = center + scale * self.std_normal();
        let b = scale * self.std_normal();
        let c = scale * self.std_normal();
        (a * a + b * b + c * c).sqrt()
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Streams for shards `start..start + count`, jumping once per shard.
pub fn shard_streams(seed: u64, start: u64, count: usize) -> Vec<Stream> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let mut s = Stream::new(seed, start);
    for _ in 1..count {
        let next = s.next_shard();
        out.push(s);
        s = next;
    }
    out.push(s);
    out
}
