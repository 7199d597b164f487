//! Synthetic Weyl-law spectra on a dilated manifold, the sum-to-integral
//! limit, the kinetic-regime test and the kinetic-constant bookkeeping.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KwrError, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::stream_rng;
use crate::specfun::{ball_volume, gamma, sphere_area, Dimension};

/// Relative jitter amplitude of [`Generation::WeylJittered`].
pub const JITTER: f64 = 0.1;

/// Margin factor standing in for "≪" in the regime test.
pub const REGIME_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub d: Dimension,
    pub volume: f64,
    /// `Γ(d/2 + 1) / vol(M)`.
    pub c_m: f64,
    /// Dilation factor.
    pub l: f64,
}

impl ManifoldModel {
    pub fn new(d: Dimension, volume: f64, l: f64) -> Result<Self> {
        if !(volume > 0.0 && volume.is_finite() && l > 0.0 && l.is_finite()) {
            return Err(KwrError::domain(format!("volume and L must be positive, got {volume}, {l}")));
        }
        Ok(ManifoldModel { d, volume, c_m: gamma(d.as_f64() / 2.0 + 1.0) / volume, l })
    }

    /// `ζ = d L^d / (2 C_M (4π)^{d/2})`, the density of dilated eigenvalues
    /// per unit `ω^{d/2−1} dω`.
    pub fn zeta(&self) -> f64 {
        let d = self.d.as_f64();
        d * self.l.powf(d) / (2.0 * self.c_m * (4.0 * PI).powf(d / 2.0))
    }

    /// `γ = L^{−d} / vol(M)`.
    pub fn gamma_coupling(&self) -> f64 {
        self.l.powf(-self.d.as_f64()) / self.volume
    }

    /// Weyl count `(2π)^{−d} v(d) vol(M) L^d Λ^{d/2}` of dilated eigenvalues below `Λ`.
    pub fn weyl_count(&self, lambda: f64) -> f64 {
        let d = self.d.as_f64();
        (2.0 * PI).powf(-d) * ball_volume(self.d) * self.volume * self.l.powf(d) * lambda.max(0.0).powf(d / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generation {
    WeylDeterministic,
    WeylJittered { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpectrum {
    pub model: ManifoldModel,
    /// Dilated eigenvalues `λ_n / L²`, nondecreasing, `n = 0, …, N−1`.
    pub eigenvalues: Vec<f64>,
    pub generation: Generation,
}

impl SyntheticSpectrum {
    /// `#{λ_n ≤ Λ}` divided by the Weyl count.
    pub fn counting_ratio(&self, lambda: f64) -> f64 {
        let count = self.eigenvalues.partition_point(|&x| x <= lambda);
        count as f64 / self.model.weyl_count(lambda)
    }
}

/// `λ_n = 4π (C_M n)^{2/d}` for `n < N`, optionally multiplied by
/// `1 + u_n`, `u_n ~ U[−δ, δ]`, then re-sorted and divided by `L²`.
pub fn weyl_eigenvalues(model: &ManifoldModel, n: usize, generation: Generation) -> Result<SyntheticSpectrum> {
    if n == 0 {
        return Err(KwrError::domain("need at least one eigenvalue"));
    }
    let exponent = 2.0 / model.d.as_f64();
    let l2 = model.l * model.l;
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| 4.0 * PI * (model.c_m * i as f64).powf(exponent) / l2).collect();
    if let Generation::WeylJittered { seed } = generation {
        let mut rng = stream_rng(seed, 0);
        for x in eigenvalues.iter_mut() {
            *x *= 1.0 + rng.random_range(-JITTER..=JITTER);
        }
        eigenvalues.sort_by(f64::total_cmp);
    }
    Ok(SyntheticSpectrum { model: *model, eigenvalues, generation })
}

/// Compactly supported test function on `[lo, hi]`.
#[derive(Clone)]
pub struct CompactFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Debug for CompactFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CompactFunction[{}, {}]", self.lo, self.hi)
    }
}

impl CompactFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(KwrError::domain(format!("bad support [{lo}, {hi}]")));
        }
        Ok(CompactFunction { f: Arc::new(f), lo, hi })
    }

    /// `exp(−1 / (1 − x²))` in the affine coordinate `x ∈ (−1, 1)` of `[lo, hi]`.
    pub fn bump(lo: f64, hi: f64) -> Result<Self> {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        Self::new(
            move |w| {
                let x = (w - mid) / half;
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - x * x)).exp()
                }
            },
            lo,
            hi,
        )
    }

    pub fn zero(lo: f64, hi: f64) -> Result<Self> {
        Self::new(|_| 0.0, lo, hi)
    }

    pub fn eval(&self, w: f64) -> f64 {
        if w <= self.lo || w >= self.hi {
            0.0
        } else {
            (self.f)(w)
        }
    }
}

/// `|Σ χ(λ_n^L) − ζ ∫ ω^{d/2−1} χ| / (ζ ∫ ω^{d/2−1} χ)`; 0 when both vanish.
pub fn sum_to_integral_check(spectrum: &SyntheticSpectrum, chi: &CompactFunction) -> Result<f64> {
    let top = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
    if chi.hi > top {
        return Err(KwrError::Truncation(format!(
            "test function support reaches {} but the spectrum stops at {top}",
            chi.hi
        )));
    }
    let sum: f64 = spectrum.eigenvalues.iter().map(|&x| chi.eval(x)).sum();
    let p = spectrum.model.d.as_f64() / 2.0 - 1.0;
    let gl = GaussLegendre::get(32);
    let panels = 64;
    let h = (chi.hi - chi.lo) / panels as f64;
    let integral: f64 = (0..panels)
        .map(|i| {
            let a = chi.lo + i as f64 * h;
            gl.integrate(a, a + h, |w| w.powf(p) * chi.eval(w))
        })
        .sum();
    let limit = spectrum.model.zeta() * integral;
    if limit == 0.0 {
        return Ok(if sum == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((sum - limit).abs() / limit.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    /// `ε / L^{−3d/2}`.
    pub m1: f64,
    /// `1 / ε`.
    pub m2: f64,
    pub factor: f64,
    pub kinetic: bool,
}

/// Checks `L^{−3d/2} ≪ ε ≪ 1` with both margins at least [`REGIME_FACTOR`].
pub fn regime_validator(l: f64, eps: f64, d: Dimension) -> Result<RegimeVerdict> {
    regime_validator_with_factor(l, eps, d, REGIME_FACTOR)
}

pub fn regime_validator_with_factor(l: f64, eps: f64, d: Dimension, factor: f64) -> Result<RegimeVerdict> {
    if !(l > 1.0 && eps > 0.0 && factor > 0.0) {
        return Err(KwrError::domain(format!("regime test needs L > 1, ε > 0; got L={l}, ε={eps}")));
    }
    let m1 = eps * l.powf(1.5 * d.as_f64());
    let m2 = 1.0 / eps;
    Ok(RegimeVerdict { m1, m2, factor, kinetic: m1 >= factor && m2 >= factor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticConstant {
    /// `4π t ε² γ³ ζ³`.
    pub lhs: f64,
    /// `(π²/2) (s(d)/(2π)^d)³ ε² t / π`.
    pub rhs: f64,
    pub relative_difference: f64,
}

/// Both sides of the kinetic-constant identity for the model's `γ` and `ζ`.
pub fn kinetic_constant(model: &ManifoldModel, eps: f64, t: f64) -> KineticConstant {
    let (g, z) = (model.gamma_coupling(), model.zeta());
    let lhs = 4.0 * PI * t * eps * eps * g.powi(3) * z.powi(3);
    let c = sphere_area(model.d) / (2.0 * PI).powi(model.d.get() as i32);
    let rhs = 0.5 * PI * PI * c.powi(3) * eps * eps * t / PI;
    let scale = lhs.abs().max(rhs.abs());
    let relative_difference = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    KineticConstant { lhs, rhs, relative_difference }
}

/// `T_kin = π ε^{−2}`.
pub fn kinetic_time(eps: f64) -> f64 {
    PI / (eps * eps)
}
