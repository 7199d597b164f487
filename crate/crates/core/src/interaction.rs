//! The four-point interaction integral
//! `I(ω₀,ω₁,ω₂,ω₃) = s(d) ∫₀^∞ q^{d-1} ∏ⱼ Λ_d(√ωⱼ q) dq`.
//!
//! The certified path integrates the near field `[0, Q]` on Gauss–Legendre
//! panels no wider than half the fastest combined oscillation period, and the
//! tail `[Q, ∞)` term by term: the product of the large-argument forms of
//! `Λ_d` splits into sixteen plane-wave patterns `G_s(q) e^{i S_s q}` with
//! `S_s = Σ sⱼ √ωⱼ`, and each pattern is integrated along the ray
//! `q = Q ± i t` on which it decays like `e^{-|S_s| t}`.
//!
//! Closed forms exist in both physical dimensions: a piecewise-linear sum over
//! sign patterns in `d = 3`, and a complete elliptic integral in `d = 2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KwrError, Result};
use crate::quadrature::{adaptive_gl, GaussLegendre};
use crate::specfun::{lambda_hankel_amplitudes, lambda_raw, sphere_area, Dimension};

/// Smallest frequency accepted by the certified integrators.
pub const OMEGA_MIN: f64 = 1e-6;

/// Ordered quadruple `(ω₀, ω₁, ω₂, ω₃)` of nonnegative frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyQuad {
    pub omega: [f64; 4],
}

impl FrequencyQuad {
    pub fn new(w0: f64, w1: f64, w2: f64, w3: f64) -> Result<Self> {
        Self::from_array([w0, w1, w2, w3])
    }

    pub fn from_array(omega: [f64; 4]) -> Result<Self> {
        if omega.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(FrequencyQuad { omega })
        } else {
            Err(KwrError::domain(format!("frequencies must be finite and >= 0, got {omega:?}")))
        }
    }

    pub fn wavenumbers(&self) -> [f64; 4] {
        self.omega.map(f64::sqrt)
    }

    /// All entries divided by `factor` (the dilation `ω ↦ ω / L²` uses `L²`).
    pub fn divided(&self, factor: f64) -> Result<Self> {
        Self::from_array(self.omega.map(|w| w / factor))
    }

    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        FrequencyQuad { omega: perm.map(|i| self.omega[i]) }
    }

    /// Rejects entries below [`OMEGA_MIN`].
    pub fn require_floor(&self) -> Result<()> {
        if let Some(w) = self.omega.iter().find(|w| **w < OMEGA_MIN) {
            return Err(KwrError::domain(format!(
                "frequency {w:e} below the positivity floor {OMEGA_MIN:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    /// Panel quadrature to `Q`, pattern-wise rotated contours beyond.
    ContourRotated,
    /// Exact evaluation; no quadrature involved.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub panels_used: usize,
    pub tail_method: TailMethod,
}

const MAX_NEAR_PANELS: usize = 4_000_000;
const MAX_TAIL_PANELS: usize = 200;

/// Certified quadrature of the interaction integral for `d ∈ {2, 3}`.
///
/// `tol` is relative to the absolute integral of the near-field integrand.
pub fn interaction_integral(d: Dimension, quad: &FrequencyQuad, tol: f64) -> Result<QuadratureReport> {
    if d.get() == 1 {
        return Err(KwrError::domain("interaction integral is not defined for d=1 (integrand does not decay)"));
    }
    if !(tol >= 1e-10) {
        return Err(KwrError::domain(format!("tolerance must be >= 1e-10, got {tol}")));
    }
    quad.require_floor()?;
    let k = quad.wavenumbers();
    let k_min = k.iter().cloned().fold(f64::INFINITY, f64::min);
    let k_sum: f64 = k.iter().sum();
    let s_d = sphere_area(d);
    let dm1 = d.get() as i32 - 1;

    // The large-argument expansion is exact in d=3 and needs |k q| >= 25 in d=2.
    let q_split = if d.get() == 3 { 2.0 / k_min } else { 25.0 / k_min };

    let f = |q: f64| -> f64 {
        let mut p = s_d * q.powi(dm1);
        for &kj in &k {
            p *= lambda_raw(d, kj * q);
        }
        p
    };

    // Near field on half-period panels.
    let width = (PI / k_sum).min(q_split);
    let n_panels = (q_split / width).ceil() as usize;
    if n_panels > MAX_NEAR_PANELS {
        return Err(KwrError::Resource(format!("near field needs {n_panels} panels")));
    }
    let h = q_split / n_panels as f64;
    let g16 = GaussLegendre::get(16);
    let g24 = GaussLegendre::get(24);
    let mut panels = Vec::with_capacity(n_panels);
    let mut abs_scale = 0.0;
    for i in 0..n_panels {
        let a = i as f64 * h;
        let b = a + h;
        let lo = g16.integrate(a, b, f);
        let mut hi = 0.0;
        for (x, w) in g24.mapped(a, b) {
            let v = w * f(x);
            hi += v;
            abs_scale += v.abs();
        }
        panels.push((a, b, hi, (hi - lo).abs()));
    }
    let panel_tol = tol * abs_scale.max(f64::MIN_POSITIVE) / n_panels as f64;
    let mut near = 0.0;
    let mut near_err = 0.0;
    let mut panels_used = 0;
    for (a, b, val, err) in panels {
        if err <= panel_tol {
            near += val;
            near_err += err;
            panels_used += 1;
        } else {
            let mut ff = f;
            let est = adaptive_gl(&mut ff, a, b, panel_tol, 12);
            near += est.value;
            near_err += est.error;
            panels_used += est.panels;
        }
    }

    let tail = interaction_tail(d, &k, q_split, tol * abs_scale.max(f64::MIN_POSITIVE))?;
    let value = near + tail.value;
    if !value.is_finite() {
        return Err(KwrError::Convergence {
            reason: "non-finite interaction integral".into(),
            partial: near,
            last_increment: tail.error,
        });
    }
    Ok(QuadratureReport {
        value,
        abs_error_estimate: near_err + tail.error,
        panels_used: panels_used + tail.panels,
        tail_method: TailMethod::ContourRotated,
    })
}

struct TailEstimate {
    value: f64,
    error: f64,
    panels: usize,
}

/// `∫_Q^∞` of the integrand, as `2 Re Σ_{s₀=+}` of rotated pattern integrals.
fn interaction_tail(d: Dimension, k: &[f64; 4], q0: f64, abs_tol: f64) -> Result<TailEstimate> {
    let s_d = sphere_area(d);
    let dm1 = d.get() as i32 - 1;
    let g = GaussLegendre::get(24);
    let g_lo = GaussLegendre::get(16);
    let i = Complex64::new(0.0, 1.0);
    let mut total = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut panels = 0;
    let pattern_tol = abs_tol / 16.0;

    for mask in 0..8u32 {
        let signs = [
            1.0,
            if mask & 1 == 0 { 1.0 } else { -1.0 },
            if mask & 2 == 0 { 1.0 } else { -1.0 },
            if mask & 4 == 0 { 1.0 } else { -1.0 },
        ];
        let s_freq: f64 = signs.iter().zip(k).map(|(s, kj)| s * kj).sum();
        let dir = if s_freq >= 0.0 { 1.0 } else { -1.0 };
        // integrand along q = Q + i·dir·t
        let integrand = |t: f64| -> Complex64 {
            let q = Complex64::new(q0, dir * t);
            let mut amp = q.powi(dm1) * (s_d / 16.0);
            for (sj, kj) in signs.iter().zip(k) {
                let (hp, hm) = lambda_hankel_amplitudes(d, q * *kj);
                amp *= if *sj > 0.0 { hp } else { hm };
            }
            amp * Complex64::from_polar((-s_freq.abs() * t).exp(), s_freq * q0)
        };
        let first = if s_freq.abs() > 0.0 { q0.min(1.0 / s_freq.abs()) } else { q0 };
        let mut a = 0.0;
        let mut b = first;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut quiet = 0;
        let mut converged = false;
        let mut last = 0.0;
        for _ in 0..MAX_TAIL_PANELS {
            let hi: Complex64 = g.mapped(a, b).map(|(t, w)| integrand(t) * w).sum();
            let lo: Complex64 = g_lo.mapped(a, b).map(|(t, w)| integrand(t) * w).sum();
            let mut contrib = hi;
            let mut err = (hi - lo).norm();
            if err > pattern_tol {
                // split the panel once more in eight pieces
                let h = (b - a) / 8.0;
                contrib = Complex64::new(0.0, 0.0);
                err = 0.0;
                for j in 0..8 {
                    let (aa, bb) = (a + j as f64 * h, a + (j + 1) as f64 * h);
                    let hi: Complex64 = g.mapped(aa, bb).map(|(t, w)| integrand(t) * w).sum();
                    let lo: Complex64 = g_lo.mapped(aa, bb).map(|(t, w)| integrand(t) * w).sum();
                    contrib += hi;
                    err += (hi - lo).norm();
                }
                panels += 7;
            }
            panels += 1;
            acc += contrib;
            error += err;
            last = contrib.norm();
            if last < 1e-3 * pattern_tol {
                quiet += 1;
                if quiet >= 2 {
                    converged = true;
                    break;
                }
            } else {
                quiet = 0;
            }
            a = b;
            b *= 2.0;
        }
        if !converged {
            return Err(KwrError::Convergence {
                reason: format!("tail pattern with S = {s_freq:e} does not decay (degenerate wavenumbers)"),
                partial: acc.re,
                last_increment: last,
            });
        }
        error += last;
        total += acc * i * dir;
    }
    Ok(TailEstimate { value: 2.0 * total.re, error: 2.0 * error, panels })
}

/// Relative residual of the dilation law `I(quad / L²) = L^d I(quad)`.
pub fn scaling_check(d: Dimension, quad: &FrequencyQuad, l: f64, tol: f64) -> Result<f64> {
    if !(0.125..=8.0).contains(&l) {
        return Err(KwrError::domain(format!("dilation L must lie in [1/8, 8], got {l}")));
    }
    let base = interaction_integral(d, quad, tol)?.value;
    let scaled_quad = quad.divided(l * l)?;
    let scaled = if l == 1.0 { base } else { interaction_integral(d, &scaled_quad, tol)?.value };
    let expected = l.powi(d.get() as i32) * base;
    Ok((scaled - expected).abs() / expected.abs())
}

/// Exact `d = 3` value: with `kⱼ = √ωⱼ`,
/// `I = (4π / ∏kⱼ) ∫₀^∞ ∏ sin(kⱼ q) / q² dq = -(π² / 8∏kⱼ) Σ_s (∏sⱼ) |Σ sⱼ kⱼ|`,
/// the sum running over all sixteen sign patterns.
pub fn interaction_integral_closed_d3(quad: &FrequencyQuad) -> Result<f64> {
    if quad.omega.iter().any(|w| *w <= 0.0) {
        return Err(KwrError::domain("closed form requires strictly positive frequencies"));
    }
    let k = quad.wavenumbers();
    Ok(closed_d3_unchecked(&k))
}

#[inline]
pub(crate) fn closed_d3_unchecked(k: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for mask in 0..8u32 {
        // s₀ = +1; the s → -s partner contributes the same term
        let s1 = if mask & 1 == 0 { 1.0 } else { -1.0 };
        let s2 = if mask & 2 == 0 { 1.0 } else { -1.0 };
        let s3 = if mask & 4 == 0 { 1.0 } else { -1.0 };
        let sum = k[0] + s1 * k[1] + s2 * k[2] + s3 * k[3];
        acc += s1 * s2 * s3 * sum.abs();
    }
    // 2 × (−π/32) × 4π = −π²/4; I ≥ 0, and outside the closure region the
    // sum cancels only to rounding
    (-PI * PI / 4.0 * acc / (k[0] * k[1] * k[2] * k[3])).max(0.0)
}

/// Exact `d = 2` value through the complete elliptic integral of the first
/// kind. With `a = k₁, b = k₂, c = k₀, e = k₃`, the roots
/// `(a−b)², (a+b)², (c−e)², (c+e)²` sorted as `e₁ ≤ e₂ ≤ e₃ ≤ e₄` give
/// `I = 8 K(m) / (π √((e₄−e₂)(e₃−e₁)))`, `m = (e₃−e₂)(e₄−e₁) / ((e₄−e₂)(e₃−e₁))`,
/// when the intervals `[(a−b)², (a+b)²]` and `[(c−e)², (c+e)²]` overlap, and 0
/// otherwise. Degenerate quads (`m = 1`) diverge logarithmically.
pub fn interaction_integral_closed_d2(quad: &FrequencyQuad) -> Result<f64> {
    if quad.omega.iter().any(|w| *w <= 0.0) {
        return Err(KwrError::domain("closed form requires strictly positive frequencies"));
    }
    let k = quad.wavenumbers();
    let v = closed_d2_unchecked(&k);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KwrError::Convergence {
            reason: "d=2 interaction integral diverges logarithmically for this degenerate quad".into(),
            partial: f64::INFINITY,
            last_increment: f64::INFINITY,
        })
    }
}

#[inline]
pub(crate) fn closed_d2_unchecked(k: &[f64; 4]) -> f64 {
    closed_d2_floor(k, 0.0)
}

/// As [`closed_d2_unchecked`], with `1 − m` floored at `m1_floor`. Quadrature
/// nodes within rounding distance of the logarithmic lines would otherwise
/// return `+∞`; the floor caps `K(m)` near 38 for `m1_floor = 1e-32`.
#[inline]
pub(crate) fn closed_d2_floor(k: &[f64; 4], m1_floor: f64) -> f64 {
    let (a, b, c, e) = (k[1], k[2], k[0], k[3]);
    let lo1 = (a - b) * (a - b);
    let hi1 = (a + b) * (a + b);
    let lo2 = (c - e) * (c - e);
    let hi2 = (c + e) * (c + e);
    let e2 = lo1.max(lo2);
    let e3 = hi1.min(hi2);
    if e3 < e2 {
        return 0.0;
    }
    let e1 = lo1.min(lo2);
    let e4 = hi1.max(hi2);
    let den = (e4 - e2) * (e3 - e1);
    if den <= 0.0 {
        return f64::INFINITY;
    }
    // complementary parameter 1 − m, formed without cancellation
    let m1 = ((e4 - e3) * (e2 - e1) / den).clamp(m1_floor, 1.0);
    8.0 * elliptic_k_complement(m1) / (PI * den.sqrt())
}

/// Complete elliptic integral of the first kind `K(m)`, `m = k²`, by the
/// arithmetic–geometric mean.
pub fn elliptic_k(m: f64) -> f64 {
    elliptic_k_complement(1.0 - m)
}

/// `K` as a function of the complementary parameter `m₁ = 1 − m`.
pub fn elliptic_k_complement(m1: f64) -> f64 {
    if m1 <= 0.0 {
        return f64::INFINITY;
    }
    let mut a = 1.0;
    let mut b = m1.sqrt();
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    PI / (2.0 * a)
}

/// Closed-form dispatch for `d ∈ {2, 3}`.
pub fn interaction_integral_closed(d: Dimension, quad: &FrequencyQuad) -> Result<f64> {
    match d.get() {
        2 => interaction_integral_closed_d2(quad),
        3 => interaction_integral_closed_d3(quad),
        _ => Err(KwrError::domain("interaction integral is not defined for d=1")),
    }
}
