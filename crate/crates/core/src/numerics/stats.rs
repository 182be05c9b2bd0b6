use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A value with its one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.value * c, self.stderr * c.abs())
    }

    /// Difference with independent errors added in quadrature.
    pub fn minus(self, other: Estimate) -> Self {
        Self::new(self.value - other.value, self.stderr.hypot(other.stderr))
    }

    pub fn plus(self, other: Estimate) -> Self {
        Self::new(self.value + other.value, self.stderr.hypot(other.stderr))
    }

    /// Number of combined standard errors separating the two estimates.
    pub fn z_score(self, other: Estimate) -> f64 {
        let d = (self.value - other.value).abs();
        let s = self.stderr.hypot(other.stderr);
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }
}

/// Running first and second moments of a sample, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        Estimate::new(self.mean, se)
    }

    pub fn merge_all<I: IntoIterator<Item = Moments>>(it: I) -> Moments {
        it.into_iter().fold(Moments::default(), Moments::merge)
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = KahanSum::default();
    for x in it {
        s.add(x);
    }
    s.total()
}

pub fn mean_and_variance(data: &[f64]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut m = Moments::default();
    for &x in data {
        m.push(x);
    }
    Ok((m.mean, m.variance()))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // The alternating series is ill-conditioned here and the tail exceeds 1 - 1e-5.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against `cdf`. Returns `(D, p)` with the asymptotic
/// p-value using Stephens' small-sample correction.
pub fn ks_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let p = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
    Ok((d, p))
}

/// Bootstrap standard error of the sample variance of integer counts, by
/// multinomial resampling of the count histogram.
pub fn bootstrap_variance_stderr(counts: &[u32], resamples: usize, rng: &mut Rng) -> f64 {
    let n = counts.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let max = *counts.iter().max().unwrap() as usize;
    let mut hist = vec![0u64; max + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    let values: Vec<usize> = (0..=max).filter(|&v| hist[v] > 0).collect();
    let mut cum = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for &v in &values {
        acc += hist[v] as f64 / n as f64;
        cum.push(acc);
    }
    let mut stats = Moments::default();
    for _ in 0..resamples {
        let mut m = Moments::default();
        for _ in 0..n {
            let u: f64 = rng.random();
            let k = cum.partition_point(|&c| c < u).min(values.len() - 1);
            m.push(values[k] as f64);
        }
        stats.push(m.variance());
    }
    stats.variance().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Classical critical values of the Kolmogorov distribution.
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_tail(1.2238) - 0.10).abs() < 2e-4);
    }

    #[test]
    fn ks_normal_sample_passes_and_skewed_fails() {
        let mut rng = crate::rng::stream(3, "ks", 0);
        let xs: Vec<f64> = (0..2000)
            .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let (_, p) = ks_test(&xs, normal_cdf).unwrap();
        assert!(p > 0.01, "p = {p}");
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.exp()).collect();
        let (m, v) = mean_and_variance(&ys).unwrap();
        let zs: Vec<f64> = ys.iter().map(|y| (y - m) / v.sqrt()).collect();
        let (_, p) = ks_test(&zs, normal_cdf).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn bootstrap_matches_normal_theory() {
        // For Poisson(20), Var(s^2) ~ (mu4 - sigma^4 (n-3)/(n-1)) / n.
        let mut rng = crate::rng::stream(4, "boot", 0);
        let pois = rand_distr::Poisson::new(20.0).unwrap();
        let counts: Vec<u32> = (0..4000)
            .map(|_| rand_distr::Distribution::sample(&pois, &mut rng) as u32)
            .collect();
        let se = bootstrap_variance_stderr(&counts, 400, &mut rng);
        let mu4 = 20.0 + 3.0 * 400.0;
        let theory = ((mu4 - 400.0 * 3997.0 / 3999.0) / 4000.0_f64).sqrt();
        assert!((se / theory - 1.0).abs() < 0.15, "{se} vs {theory}");
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let s = neumaier_sum([1e16, 1.0, -1e16, 1.0]);
        assert_eq!(s, 2.0);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let k = split.min(xs.len());
            let mut a = Moments::default();
            let mut b = Moments::default();
            let mut all = Moments::default();
            for &x in &xs[..k] { a.push(x); }
            for &x in &xs[k..] { b.push(x); }
            for &x in &xs { all.push(x); }
            let m = a.merge(b);
            prop_assert_eq!(m.n, all.n);
            prop_assert!((m.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
            prop_assert!((m.variance() - all.variance()).abs() <= 1e-7 * (1.0 + all.variance()));
        }

        #[test]
        fn ks_statistic_in_unit_interval(xs in prop::collection::vec(-5f64..5.0, 1..100)) {
            let (d, p) = ks_test(&xs, normal_cdf).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
