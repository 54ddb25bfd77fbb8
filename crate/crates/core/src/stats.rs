//! Small Monte Carlo helpers: means with standard errors and comparisons.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            n: 0,
        }
    }

    /// Sample mean and standard error of the mean (Welford).
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let stderr = if n > 1 {
            (m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, n }
    }

    /// Binomial proportion `k / n` with stderr `sqrt(p(1-p)/n)`.
    pub fn proportion(k: usize, n: usize) -> Self {
        let p = k as f64 / n as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate {
            mean: self.mean * c,
            stderr: self.stderr * c.abs(),
            n: self.n,
        }
    }

    /// Product of two independent estimates (delta method).
    pub fn times(self, other: Estimate) -> Self {
        Estimate {
            mean: self.mean * other.mean,
            stderr: ((other.mean * self.stderr).powi(2) + (self.mean * other.stderr).powi(2)).sqrt(),
            n: self.n.min(other.n),
        }
    }

    /// Sample variance implied by the standard error.
    pub fn variance(&self) -> f64 {
        self.stderr * self.stderr * self.n as f64
    }
}

/// `|a - b|` against the combined standard error of two independent estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub combined_stderr: f64,
    /// `|lhs - rhs| / combined_stderr`; 0 when both sides agree exactly.
    pub z: f64,
}

impl Comparison {
    pub fn new(lhs: Estimate, rhs: Estimate) -> Self {
        let se = lhs.stderr.hypot(rhs.stderr);
        let diff = (lhs.mean - rhs.mean).abs();
        let z = if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            diff / se
        };
        Comparison {
            lhs,
            rhs,
            combined_stderr: se,
            z,
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z <= sigmas
    }
}

/// Empirical quantile with linear interpolation, `p ∈ [0,1]`, on sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of arbitrary data.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let e = Estimate::from_samples(xs);
        assert!((e.mean - 5.0).abs() < 1e-15);
        let var = xs.iter().map(|x| (x - 5.0f64).powi(2)).sum::<f64>() / 4.0;
        assert!((e.stderr - (var / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn comparison_z() {
        let c = Comparison::new(Estimate::exact(1.0), Estimate::exact(1.0));
        assert_eq!(c.z, 0.0);
        assert!(c.within(3.0));
        let c = Comparison::new(
            Estimate {
                mean: 1.0,
                stderr: 0.3,
                n: 10,
            },
            Estimate {
                mean: 1.5,
                stderr: 0.4,
                n: 10,
            },
        );
        assert!((c.z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&v, 0.5), 1.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
