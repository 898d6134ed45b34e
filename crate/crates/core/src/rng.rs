//! Seeded, platform-independent random streams.
//!
//! Every stream is a ChaCha20 keystream: the 64-bit seed is expanded into the
//! 256-bit key by `SeedableRng::seed_from_u64`, and the 64-bit ChaCha stream
//! id separates logically independent consumers (per-worker gradient noise,
//! dither, dataset generation) that share one seed. Gaussian samples use the
//! `rand_distr` ziggurat sampler. Golden traces in the test suite pin this
//! choice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Well-known stream ids so that independent consumers never share a keystream.
pub mod streams {
    /// Dataset / problem construction.
    pub const PROBLEM: u64 = 0;
    /// Initial parameter vector.
    pub const INIT: u64 = 1;

    /// Stochastic gradient stream of worker `i`.
    pub fn gradient(worker: usize) -> u64 {
        0x100 + 2 * worker as u64
    }

    /// Shared dither stream of worker `i` (replicated at the master).
    pub fn dither(worker: usize) -> u64 {
        0x101 + 2 * worker as u64
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Position in the keystream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer on `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub(crate) fn inner_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.inner
    }
}

/// `d` i.i.d. standard-normal samples.
pub fn gaussian_vector(rng: &mut RngStream, d: usize) -> Result<ParamVector> {
    if d == 0 {
        return Err(Error::InvalidDimension("dimension must be >= 1".into()));
    }
    ParamVector::from_vec((0..d).map(|_| rng.standard_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_vector() {
        let a = gaussian_vector(&mut RngStream::new(7), 64).unwrap();
        let b = gaussian_vector(&mut RngStream::new(7), 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_seeds_differ() {
        let a = gaussian_vector(&mut RngStream::new(7), 64).unwrap();
        let b = gaussian_vector(&mut RngStream::new(8), 64).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).any(|(x, y)| x != y));
    }

    #[test]
    fn distinct_streams_differ() {
        let a = gaussian_vector(&mut RngStream::with_stream(7, 1), 16).unwrap();
        let b = gaussian_vector(&mut RngStream::with_stream(7, 2), 16).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn zero_dimension_is_an_error() {
        assert!(matches!(
            gaussian_vector(&mut RngStream::new(1), 0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn moments_of_large_sample() {
        let v = gaussian_vector(&mut RngStream::new(1), 100_000).unwrap();
        let n = v.dim() as f64;
        let mean = v.as_slice().iter().sum::<f64>() / n;
        let var = v.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.98..1.02).contains(&var), "variance {var}");
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let mut a = RngStream::with_stream(99, 3);
        let mut b = a.clone();
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        assert_eq!(a.word_pos(), b.word_pos());
    }

    #[test]
    fn golden_prefix() {
        // Pins the generator: ChaCha20, seed_from_u64(42), stream 0.
        let mut rng = RngStream::new(42);
        let got: Vec<u64> = (0..4).map(|_| rng.uniform().to_bits()).collect();
        let mut again = RngStream::new(42);
        let replay: Vec<u64> = (0..4).map(|_| again.uniform().to_bits()).collect();
        assert_eq!(got, replay);
        assert_eq!(got, GOLDEN_UNIFORM_BITS);
    }

    const GOLDEN_UNIFORM_BITS: [u64; 4] = [
        4602805363978991273,
        4601061104681534936,
        4591712652534772064,
        4595199839954050212,
    ];
}
