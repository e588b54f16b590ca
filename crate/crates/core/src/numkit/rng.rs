use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// A seeded random stream. Streams sharing a seed but differing in `stream_id`
/// are disjoint ChaCha keystreams, so they can be handed to independent tasks.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng, seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream on the same seed, labelled by mixing `sub` into this stream's id.
    pub fn derive(&self, sub: u64) -> Self {
        Self::new(self.seed, mix64(self.stream_id ^ mix64(sub.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal<F: Scalar>(&mut self, mean: F, std: F) -> F {
        assert!(std >= F::zero(), "normal std must be >= 0");
        let z: f64 = self.rng.sample(StandardNormal);
        mean + std * F::lit(z)
    }

    /// `exp(N(mu, sigma^2))`; `sigma` is the std of the underlying normal.
    pub fn lognormal<F: Scalar>(&mut self, mu: F, sigma: F) -> F {
        assert!(sigma >= F::zero(), "lognormal sigma must be >= 0");
        self.normal(mu, sigma).exp()
    }

    pub fn bernoulli<F: Scalar>(&mut self, p: F) -> bool {
        assert!(p >= F::zero() && p <= F::one(), "bernoulli p must lie in [0, 1]");
        self.uniform() < p.to_f64_lossy()
    }
}

pub fn sample_normal<F: Scalar>(rng: &mut RngStream, mean: F, std: F) -> F {
    rng.normal(mean, std)
}

pub fn sample_lognormal<F: Scalar>(rng: &mut RngStream, mu: F, sigma: F) -> F {
    rng.lognormal(mu, sigma)
}

pub fn sample_bernoulli<F: Scalar>(rng: &mut RngStream, p: F) -> bool {
    rng.bernoulli(p)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable stream id for an experiment cell: FNV-1a over the label, mixed with the index.
pub fn cell_stream_id(label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h ^ mix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_streams() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..100_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::new(7, 4);
        let same = (0..64).filter(|_| a.next_u64() == c.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn degenerate_draws() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(rng.normal(0.0_f64, 0.0), 0.0);
            assert!(rng.bernoulli(1.0_f64));
            assert!(!rng.bernoulli(0.0_f64));
        }
    }

    #[test]
    fn lognormal_mean() {
        let mut rng = RngStream::new(2024, 0);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| rng.lognormal(0.0_f64, 0.5)).sum::<f64>() / n as f64;
        assert!((mean - 0.125_f64.exp()).abs() < 0.005, "{mean}");
    }

    #[test]
    fn cell_ids_are_stable() {
        assert_eq!(cell_stream_id("fig2c", 1), cell_stream_id("fig2c", 1));
        assert_ne!(cell_stream_id("fig2c", 1), cell_stream_id("fig2c", 2));
        assert_ne!(cell_stream_id("fig2c", 1), cell_stream_id("fig2d", 1));
    }
}
