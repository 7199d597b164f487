use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{KwrError, Result};
use crate::rng::{stream_rng, unit_vector};
use crate::specfun::Dimension;
use crate::stats::Welford;

/// One realization of `Φ(x) = √(2/n) Σⱼ cos(√λ θⱼ·x + φⱼ)`.
#[derive(Debug, Clone)]
pub struct MonochromaticWave {
    pub d: Dimension,
    pub wavenumber: f64,
    directions: Vec<f64>,
    phases: Vec<f64>,
}

impl MonochromaticWave {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dim = self.d.get() as usize;
        let n = self.phases.len();
        let sum: f64 = self
            .directions
            .chunks_exact(dim)
            .zip(&self.phases)
            .map(|(th, ph)| {
                let dot: f64 = th.iter().zip(x).map(|(a, b)| a * b).sum();
                (self.wavenumber * dot + ph).cos()
            })
            .sum();
        (2.0 / n as f64).sqrt() * sum
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Random superposition of `n_plane_waves ≥ 64` plane waves of frequency `λ`.
pub fn sample_monochromatic_wave(d: Dimension, lambda: f64, n_plane_waves: usize, seed: u64) -> Result<MonochromaticWave> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(KwrError::domain(format!("frequency must be positive, got {lambda}")));
    }
    if n_plane_waves < 64 {
        return Err(KwrError::domain("at least 64 plane waves are required"));
    }
    let dim = d.get() as usize;
    let mut rng = stream_rng(seed, 0);
    let mut directions = vec![0.0; n_plane_waves * dim];
    for th in directions.chunks_exact_mut(dim) {
        unit_vector(&mut rng, dim, th);
    }
    let phases = (0..n_plane_waves).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    Ok(MonochromaticWave { d, wavenumber: lambda.sqrt(), directions, phases })
}

/// Empirical `E[Φ(0)Φ(y)]` with `|y| = r` along the first axis, over
/// `realizations` independent waves (seeds `seed, seed + 1, …`).
pub fn two_point_correlation(
    d: Dimension,
    lambda: f64,
    r: f64,
    n_plane_waves: usize,
    realizations: usize,
    seed: u64,
) -> Result<Welford> {
    let dim = d.get() as usize;
    let origin = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    y[0] = r;
    let parts: Result<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|i| {
            let w = sample_monochromatic_wave(d, lambda, n_plane_waves, seed.wrapping_add(i as u64))?;
            Ok(w.eval(&origin) * w.eval(&y))
        })
        .collect();
    let mut acc = Welford::new();
    for v in parts? {
        acc.push(v);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{lambda_d, RadialArgument};

    #[test]
    fn variance_is_one() {
        let acc = two_point_correlation(Dimension::TWO, 1.0, 0.0, 64, 10_000, 11).unwrap();
        assert!((acc.mean - 1.0).abs() < 3.0 * acc.stderr(), "{acc:?}");
    }

    #[test]
    fn correlation_vanishes_at_kernel_zeros() {
        let c3 = two_point_correlation(Dimension::THREE, 4.0, PI / 2.0, 64, 10_000, 21).unwrap();
        assert!(c3.mean.abs() < 3.0 * c3.stderr(), "{c3:?}");
        let c2 = two_point_correlation(Dimension::TWO, 1.0, 2.404825557695773, 64, 10_000, 31).unwrap();
        assert!(c2.mean.abs() < 3.0 * c2.stderr(), "{c2:?}");
        // sanity: away from zeros the correlation is resolved
        let expected = lambda_d(Dimension::TWO, RadialArgument::new(1.0).unwrap());
        let c = two_point_correlation(Dimension::TWO, 1.0, 1.0, 64, 10_000, 41).unwrap();
        assert!((c.mean - expected).abs() < 3.0 * c.stderr());
        assert!(expected > 10.0 * c.stderr());
    }

    #[test]
    fn too_few_waves_rejected() {
        assert!(sample_monochromatic_wave(Dimension::THREE, 1.0, 10, 0).is_err());
    }
}
