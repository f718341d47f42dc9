//! Seeded random streams.
//!
//! All randomness comes from xoshiro256++ seeded through SplitMix64
//! (`SeedableRng::seed_from_u64`). Independent substreams are produced with
//! the generator's jump function: substream `i` of seed `s` is the seed-`s`
//! state advanced by `i` jumps of 2^128 steps, so partitions never overlap
//! and do not depend on thread count.
//!
//! Normal deviates use the Marsaglia polar method (the spare value is
//! discarded so that every call consumes a whole number of rejection rounds).
//! Poisson deviates use sequential inversion for means below 30 and
//! Hörmann's transformed rejection (PTRS) above.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: Xoshiro256PlusPlus,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Stream `index` of `seed`, disjoint from every other index.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = Self::new(seed);
        for _ in 0..index {
            rng.inner.jump();
        }
        rng
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    pub fn normal(&mut self, mean: f64, sigma: f64) -> f64 {
        mean + sigma * self.standard_normal()
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) {
            return 0;
        }
        if mean < POISSON_INVERSION_LIMIT {
            self.poisson_inversion(mean)
        } else {
            self.poisson_ptrs(mean)
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        let u = self.uniform();
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        k
    }

    // W. Hörmann, "The transformed rejection method for generating Poisson
    // random variables", Insurance: Mathematics and Economics 12 (1993).
    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let slam = mean.sqrt();
        let loglam = mean.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
            let rhs = -mean + k * loglam - libm::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // Rounding can leave target == total; fall back to the last non-zero weight.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        let mut c = SimRng::new(8);
        assert_ne!(SimRng::new(7).uniform(), c.uniform());
    }

    #[test]
    fn substreams_differ() {
        let x0 = SimRng::substream(1, 0).uniform();
        let x1 = SimRng::substream(1, 1).uniform();
        assert_ne!(x0, x1);
        assert_eq!(x0, SimRng::new(1).uniform());
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn normal_moments() {
        let mut rng = SimRng::new(11);
        let xs: Vec<f64> = (0..200_000).map(|_| rng.normal(3.0, 2.0)).collect();
        let (m, v) = mean_var(&xs);
        let se = 2.0 / (xs.len() as f64).sqrt();
        assert!((m - 3.0).abs() < 4.0 * se, "{m}");
        assert!((v / 4.0 - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn poisson_moments_both_regimes() {
        for &mean in &[0.3, 4.0, 29.5, 30.0, 100.0, 2500.0] {
            let mut rng = SimRng::new(99);
            let xs: Vec<f64> = (0..100_000).map(|_| rng.poisson(mean) as f64).collect();
            let (m, v) = mean_var(&xs);
            let se = (mean / xs.len() as f64).sqrt();
            assert!((m - mean).abs() < 4.0 * se, "mean {mean}: {m}");
            assert!((v / mean - 1.0).abs() < 0.03, "mean {mean}: var {v}");
        }
        assert_eq!(SimRng::new(0).poisson(0.0), 0);
    }

    #[test]
    fn poisson_pmf_matches_at_large_mean() {
        let mean = 45.0;
        let mut rng = SimRng::new(5);
        let n = 400_000;
        let mut hist = [0u32; 120];
        for _ in 0..n {
            let k = rng.poisson(mean) as usize;
            if k < hist.len() {
                hist[k] += 1;
            }
        }
        for (k, &count) in hist.iter().enumerate().take(55).skip(35) {
            let pmf = (-mean + k as f64 * f64::ln(mean) - libm::lgamma(k as f64 + 1.0)).exp();
            let expected = pmf * n as f64;
            let got = f64::from(count);
            assert!((got - expected).abs() < 5.0 * expected.sqrt(), "k={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut rng = SimRng::new(3);
        for _ in 0..1000 {
            assert_ne!(rng.categorical(&[0.5, 0.0, 0.5]), 1);
        }
    }
}
