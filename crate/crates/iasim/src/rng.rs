//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by the
//! scenario seed plus a packed `(domain, trial, a, b, c)` tuple. Streams for
//! distinct tuples are disjoint, so trials (and the per-TX estimates inside a
//! trial) can be generated concurrently and in any order without changing the
//! result.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DOMAIN_CHANNEL: u64 = 1;
pub const DOMAIN_CSIT: u64 = 2;
pub const DOMAIN_PROP2: u64 = 3;
pub const DOMAIN_QUANTIZER: u64 = 4;

/// Packs a stream key. `trial` gets 36 bits, the small indices 8 bits each.
pub fn stream_id(domain: u64, trial: u64, a: u64, b: u64, c: u64) -> u64 {
    debug_assert!(trial < 1 << 36 && a < 256 && b < 256 && c < 256);
    (domain << 60) | (trial << 24) | (a << 16) | (b << 8) | c
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian, zero mean, variance `var`
/// (i.e. `E|z|^2 = var`).
pub fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_disjoint() {
        let mut a = stream_rng(7, stream_id(DOMAIN_CHANNEL, 0, 0, 0, 0));
        let mut b = stream_rng(7, stream_id(DOMAIN_CHANNEL, 1, 0, 0, 0));
        let xs: Vec<u64> = (0..8).map(|_| a.gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn same_key_same_stream() {
        let id = stream_id(DOMAIN_CSIT, 3, 1, 2, 0x21);
        let mut a = stream_rng(42, id);
        let mut b = stream_rng(42, id);
        assert_eq!(complex_gaussian(&mut a, 1.0), complex_gaussian(&mut b, 1.0));
    }

    #[test]
    fn complex_gaussian_unit_variance() {
        let mut rng = stream_rng(1, 0);
        let n = 20_000;
        let mean_sq: f64 = (0..n)
            .map(|_| complex_gaussian(&mut rng, 1.0).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.05, "E|z|^2 = {mean_sq}");
    }
}
