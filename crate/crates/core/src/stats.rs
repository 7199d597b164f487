//! Streaming mean/variance accumulators.

use serde::{Deserialize, Serialize};

/// Welford accumulator; `merge` is associative up to rounding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Rayleigh test of uniformity for angles on the circle: p-value of
/// `Z = n R̄²` with the second-order small-sample correction.
pub fn rayleigh_p_value(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    if n < 2.0 {
        return 1.0;
    }
    let (c, s) = angles.iter().fold((0.0, 0.0), |(c, s), t| (c + t.cos(), s + t.sin()));
    let z = (c * c + s * s) / n;
    let corr = 1.0 + (2.0 * z - z * z) / (4.0 * n)
        - (24.0 * z - 132.0 * z * z + 76.0 * z.powi(3) - 9.0 * z.powi(4)) / (288.0 * n * n);
    ((-z).exp() * corr).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_separates_uniform_from_concentrated() {
        let uniform: Vec<f64> = (0..1000).map(|i| i as f64 * 2.399963).collect();
        assert!(rayleigh_p_value(&uniform) > 0.5);
        let bunched: Vec<f64> = (0..1000).map(|i| 0.3 * ((i % 7) as f64 - 3.0)).collect();
        assert!(rayleigh_p_value(&bunched) < 1e-10);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let mut all = Welford::new();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Welford::new();
        let mut b = Welford::new();
        xs[..37].iter().for_each(|x| a.push(*x));
        xs[37..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_eq!(a.count, 100);
        assert!((a.mean - all.mean).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }
}
