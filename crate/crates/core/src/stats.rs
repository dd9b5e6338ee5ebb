//! Small statistics helpers for run summaries.

use serde::Serialize;

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunningMoments {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of ascending
/// `sorted` and a continuous model CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        // Empirical CDF jumps from i/n to j/n at x.
        d = d
            .max((f - i as f64 / n).abs())
            .max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

/// Fraction of `sorted` strictly above `x`.
pub fn empirical_ccdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let above = sorted.len() - sorted.partition_point(|&y| y <= x);
    above as f64 / sorted.len() as f64
}
