use serde::{Deserialize, Serialize};

use crate::error::{KwrError, Result};

/// Weighted least-squares fit `v(σ) ≈ c₀ + c₁σ + c₂σ²` evaluated at `σ = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    pub stderr: f64,
    pub coefficients: [f64; 3],
    /// Weighted residual sum of squares (one degree of freedom at four levels).
    pub chi2: f64,
}

/// The linear term is kept because the smoothed delta sits on a kink of the
/// sphere-convolution density whenever `√ω₀` equals some `|±√ω₁ ± √ω₂ ± √ω₃|`.
///
/// Errors are floored at the smallest positive one seen, and at `10⁻⁶` of the
/// largest; if every level is exact the fit is unweighted.
pub fn extrapolate_sigma(sigma: &[f64], value: &[f64], stderr: &[f64]) -> Result<Extrapolation> {
    let n = sigma.len();
    if n < 3 || value.len() != n || stderr.len() != n {
        return Err(KwrError::Extrapolation(format!("need at least 3 σ levels, got {n}")));
    }
    let min_se = stderr.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let max_se = stderr.iter().copied().fold(0.0, f64::max);
    // weight ratios are capped at 1e12
    let floor = if min_se.is_finite() { min_se.max(1e-6 * max_se) } else { 1.0 };
    // weights relative to the best level keep the normal equations finite
    let weight = |s: f64| (floor / s.max(floor)).powi(2);
    // normal equations in the scaled variable u = σ / σ_max
    let scale = sigma.iter().copied().fold(0.0, f64::max);
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..n {
        let u = sigma[i] / scale;
        let row = [1.0, u, u * u];
        let w = weight(stderr[i]);
        for r in 0..3 {
            b[r] += w * row[r] * value[i];
            for c in 0..3 {
                a[r][c] += w * row[r] * row[c];
            }
        }
    }
    let inv = invert3(&a).ok_or_else(|| KwrError::Extrapolation("singular σ design".into()))?;
    let mut c = [0.0; 3];
    for r in 0..3 {
        c[r] = (0..3).map(|k| inv[r][k] * b[k]).sum();
    }
    let chi2 = (0..n)
        .map(|i| {
            let u = sigma[i] / scale;
            let fit = c[0] + c[1] * u + c[2] * u * u;
            weight(stderr[i]) * ((value[i] - fit) / floor).powi(2)
        })
        .sum();
    let stderr0 = if stderr.iter().all(|s| *s == 0.0) { 0.0 } else { inv[0][0].sqrt() * floor };
    Ok(Extrapolation {
        value: c[0],
        stderr: stderr0,
        coefficients: [c[0], c[1] / scale, c[2] / (scale * scale)],
        chi2,
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(det.abs() > 1e-14 * (m[0][0] * m[1][1] * m[2][2]).abs()) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}
