use std::sync::Arc;

use super::grid::{FrequencyGrid, GridLocation};
use crate::error::{KwrError, Result};

/// Nonnegative spectrum `ρ(ωᵢ)` on a [`FrequencyGrid`] with a piecewise-cubic
/// Hermite interpolant in the grid coordinate (`ω` or `ln ω`).
///
/// Node slopes are fourth-order finite differences clamped to `|m| ≤ 3ρᵢ/h`,
/// which keeps the interpolant nonnegative. A full monotonicity limiter is
/// deliberately not applied: its switching makes `C[ρ]` non-smooth in the node
/// values and costs the time integrator its order. The interpolant vanishes
/// beyond the last node and is held constant below the first.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    grid: Arc<FrequencyGrid>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(grid: Arc<FrequencyGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KwrError::domain(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(KwrError::domain(format!("density value {v} at node {i} is not finite and >= 0")));
        }
        let slopes = limited_slopes(&values, grid.step());
        Ok(SpectralDensity { grid, values, slopes })
    }

    /// `ρ(ωᵢ) = f(ωᵢ)` at every node.
    pub fn from_fn(grid: Arc<FrequencyGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|w| f(*w)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }

    #[inline]
    pub fn eval(&self, omega: f64) -> f64 {
        let loc = self.grid.locate(omega);
        self.eval_loc(loc)
    }

    /// Interpolant at a precomputed location (see [`FrequencyGrid::locate`]).
    #[inline]
    pub fn eval_loc(&self, loc: GridLocation) -> f64 {
        let i = loc.index as usize;
        let t = loc.t;
        if t > 1.0 {
            return 0.0;
        }
        let h = self.grid.step();
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.values[i] + h * (h10 * self.slopes[i] + h11 * self.slopes[i + 1]) + h01 * self.values[i + 1];
        v.max(0.0)
    }
}

fn limited_slopes(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut m = vec![0.0; n];
    if n == 2 {
        let s = (f[1] - f[0]) / h;
        return vec![s, s];
    }
    if n < 5 {
        for i in 0..n {
            m[i] = if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            };
        }
    } else {
        for i in 0..n {
            m[i] = match i {
                0 => (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h),
                1 => (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h),
                i if i == n - 2 => {
                    (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h)
                }
                i if i == n - 1 => {
                    (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5])
                        / (12.0 * h)
                }
                i => (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h),
            };
        }
    }
    // |m| ≤ 3ρᵢ/h at every node is sufficient for a nonnegative cubic on
    // both adjacent intervals; it only binds in rapidly vanishing tails.
    for i in 0..n {
        let cap = 3.0 * f[i] / h;
        m[i] = m[i].clamp(-cap, cap);
    }
    m
}
