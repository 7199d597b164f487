use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KwrError, Result};
use crate::interaction::OMEGA_MIN;

/// Interval index and local coordinate `t ∈ [0, 1]` of a frequency; `t > 1`
/// marks points beyond the last node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLocation {
    pub index: u32,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Uniform,
    LogUniform,
}

/// Strictly increasing frequency nodes, uniform in `ω` or in `ln ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
    u0: f64,
    h: f64,
}

impl FrequencyGrid {
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::check(lo, hi, n)?;
        let h = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        nodes[n - 1] = hi;
        Ok(Self::finish(nodes, Spacing::Uniform))
    }

    pub fn log_uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::check(lo, hi, n)?;
        let (a, b) = (lo.ln(), hi.ln());
        let h = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| (a + h * i as f64).exp()).collect();
        nodes[0] = lo;
        nodes[n - 1] = hi;
        Ok(Self::finish(nodes, Spacing::LogUniform))
    }

    pub fn new(spacing: Spacing, lo: f64, hi: f64, n: usize) -> Result<Self> {
        match spacing {
            Spacing::Uniform => Self::uniform(lo, hi, n),
            Spacing::LogUniform => Self::log_uniform(lo, hi, n),
        }
    }

    fn finish(nodes: Vec<f64>, spacing: Spacing) -> Self {
        let mut g = FrequencyGrid { nodes, spacing, u0: 0.0, h: 1.0 };
        let n = g.nodes.len();
        g.u0 = g.coordinate(g.nodes[0]);
        g.h = (g.coordinate(g.nodes[n - 1]) - g.u0) / (n - 1) as f64;
        g
    }

    fn check(lo: f64, hi: f64, n: usize) -> Result<()> {
        if n < 2 {
            return Err(KwrError::domain("a frequency grid needs at least 2 nodes"));
        }
        if !(lo >= OMEGA_MIN && hi > lo && hi.is_finite()) {
            return Err(KwrError::domain(format!(
                "grid range [{lo}, {hi}] must satisfy {OMEGA_MIN:e} <= lo < hi < inf"
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn omega_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn omega_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// The coordinate in which the grid is uniform.
    #[inline]
    pub fn coordinate(&self, omega: f64) -> f64 {
        match self.spacing {
            Spacing::Uniform => omega,
            Spacing::LogUniform => omega.ln(),
        }
    }

    /// Uniform step in [`coordinate`](Self::coordinate).
    #[inline]
    pub fn step(&self) -> f64 {
        self.h
    }

    /// Locates `omega`; points below the first node clamp to it.
    #[inline]
    pub fn locate(&self, omega: f64) -> GridLocation {
        let n = self.nodes.len();
        if omega > self.nodes[n - 1] {
            return GridLocation { index: (n - 2) as u32, t: 2.0 };
        }
        if omega <= self.nodes[0] {
            return GridLocation { index: 0, t: 0.0 };
        }
        let s = (self.coordinate(omega) - self.u0) / self.h;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        GridLocation { index: i as u32, t: (s - i as f64).clamp(0.0, 1.0) }
    }

    /// SHA-256 over the spacing tag and the node bit patterns.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update([self.spacing as u8]);
        h.update((self.nodes.len() as u64).to_le_bytes());
        for x in &self.nodes {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints_and_monotonicity() {
        let g = FrequencyGrid::log_uniform(1e-3, 40.0, 256).unwrap();
        assert_eq!(g.omega_min(), 1e-3);
        assert_eq!(g.omega_max(), 40.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        let r = g.nodes()[1] / g.nodes()[0];
        assert!((g.step() - r.ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(FrequencyGrid::uniform(0.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::uniform(1.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::log_uniform(1e-3, 1.0, 1).is_err());
    }

    #[test]
    fn hash_distinguishes_grids() {
        let a = FrequencyGrid::log_uniform(1e-3, 40.0, 64).unwrap();
        let b = FrequencyGrid::log_uniform(1e-3, 40.0, 65).unwrap();
        let c = FrequencyGrid::uniform(1e-3, 40.0, 64).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }
}
