use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{KwrError, Result};
use crate::specfun::Dimension;

/// Cubic NLS `i∂ₜu + Δu = ε|u|²u` on the torus `(ℝ/Lℤ)^d`, truncated to an
/// `N^d` Fourier grid. Modes are `k = m/L`, `m ∈ [−N/2, N/2)^d`, in FFT
/// order; only `|mᵢ| < N/3` are evolved (2/3 rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusModel {
    pub d: Dimension,
    pub l: f64,
    pub n_modes: usize,
    pub eps: f64,
}

impl TorusModel {
    pub fn new(d: Dimension, l: f64, n_modes: usize, eps: f64) -> Result<Self> {
        if d.get() > 2 {
            return Err(KwrError::UnsupportedDimension(d.get()));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(KwrError::domain(format!("torus length must be positive, got {l}")));
        }
        if !n_modes.is_power_of_two() || n_modes < 4 {
            return Err(KwrError::domain(format!("n_modes must be a power of two >= 4, got {n_modes}")));
        }
        if !eps.is_finite() {
            return Err(KwrError::domain("eps must be finite"));
        }
        let cells = n_modes.checked_pow(d.get()).filter(|c| *c <= 1 << 24);
        if cells.is_none() {
            return Err(KwrError::Resource(format!("{n_modes}^{} grid exceeds 2^24 cells", d.get())));
        }
        Ok(TorusModel { d, l, n_modes, eps })
    }

    /// d=2, L=16, N=128, ε=0.05.
    pub fn default_fixture() -> Self {
        TorusModel { d: Dimension::TWO, l: 16.0, n_modes: 128, eps: 0.05 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.d.get() as usize
    }

    /// `γ = L^{−d}`.
    pub fn gamma(&self) -> f64 {
        self.l.powi(-(self.d.get() as i32))
    }

    pub fn len(&self) -> usize {
        self.n_modes.pow(self.d.get())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest retained `|mᵢ|`.
    pub fn cutoff(&self) -> i64 {
        (self.n_modes as i64 - 1) / 3
    }

    /// Integer coordinates of the mode at flat index `idx`.
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        let n = self.n_modes;
        let mut m = [0i64; 2];
        let mut rest = idx;
        for slot in m.iter_mut().take(self.dim()) {
            let j = (rest % n) as i64;
            rest /= n;
            *slot = if j < (n / 2) as i64 { j } else { j - n as i64 };
        }
        m
    }

    /// Flat index of `m`, which may lie outside `[−N/2, N/2)` (wrapped).
    pub fn index(&self, m: &[i64]) -> usize {
        let n = self.n_modes as i64;
        let mut idx = 0usize;
        for a in (0..self.dim()).rev() {
            idx = idx * n as usize + m[a].rem_euclid(n) as usize;
        }
        idx
    }

    pub fn is_retained(&self, idx: usize) -> bool {
        let c = self.cutoff();
        self.mode(idx).iter().take(self.dim()).all(|m| m.abs() <= c)
    }

    /// `ω = |2πk|²`.
    pub fn omega(&self, idx: usize) -> f64 {
        let m = self.mode(idx);
        let s = 2.0 * PI / self.l;
        s * s * m.iter().take(self.dim()).map(|x| (x * x) as f64).sum::<f64>()
    }

    pub fn max_omega(&self) -> f64 {
        let s = 2.0 * PI * self.cutoff() as f64 / self.l;
        s * s * self.dim() as f64
    }

    /// Flat indices of the retained modes, in FFT order.
    pub fn retained(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| self.is_retained(*i)).collect()
    }
}

/// Fourier amplitudes `A_k` of `u = Σ A_k L^{−d/2} e^{2πik·x}` on the full
/// `N^d` grid; modes outside the 2/3 band stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl ModeField {
    pub fn zeros(model: &TorusModel) -> Self {
        ModeField { amplitudes: vec![Complex64::new(0.0, 0.0); model.len()], time: 0.0 }
    }

    /// `𝔪 = ‖u‖² = Σ|A_k|²`.
    pub fn mass(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Unnormalized multidimensional FFT on the model grid, axis by axis.
pub(crate) struct Transform {
    n: usize,
    d: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub(crate) fn new(model: &TorusModel) -> Self {
        let n = model.n_modes;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let s = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Transform {
            n,
            d: model.dim(),
            fwd,
            inv,
            line: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); s],
        }
    }

    /// `x_j = Σ_m A_m e^{2πi m·j/N}`.
    pub(crate) fn to_physical(&mut self, data: &mut [Complex64]) {
        let f = self.inv.clone();
        self.apply(data, &*f);
    }

    /// `Σ_j x_j e^{−2πi m·j/N}` (no `1/N^d`).
    pub(crate) fn to_modes(&mut self, data: &mut [Complex64]) {
        let f = self.fwd.clone();
        self.apply(data, &*f);
    }

    fn apply(&mut self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        // axis 0 is contiguous
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut self.scratch);
        }
        if self.d == 2 {
            for c in 0..n {
                for r in 0..n {
                    self.line[r] = data[r * n + c];
                }
                fft.process_with_scratch(&mut self.line, &mut self.scratch);
                for r in 0..n {
                    data[r * n + c] = self.line[r];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_validation() {
        assert!(TorusModel::new(Dimension::TWO, 16.0, 100, 0.1).is_err());
        assert!(TorusModel::new(Dimension::TWO, 0.0, 64, 0.1).is_err());
        assert!(TorusModel::new(Dimension::THREE, 16.0, 64, 0.1).is_err());
        assert!(TorusModel::new(Dimension::ONE, 16.0, 64, 0.1).is_ok());
    }

    #[test]
    fn indexing_round_trips() {
        let m = TorusModel::new(Dimension::TWO, 8.0, 16, 0.1).unwrap();
        for i in 0..m.len() {
            let k = m.mode(i);
            assert_eq!(m.index(&k), i);
            assert!(k[0] >= -8 && k[0] < 8 && k[1] >= -8 && k[1] < 8);
        }
        assert_eq!(m.cutoff(), 5);
        assert_eq!(m.retained().len(), 11 * 11);
        let i = m.index(&[3, -4]);
        assert!((m.omega(i) - (2.0 * PI / 8.0).powi(2) * 25.0).abs() < 1e-13);
    }

    #[test]
    fn transform_round_trip_and_plane_wave() {
        let m = TorusModel::new(Dimension::TWO, 8.0, 8, 0.1).unwrap();
        let mut t = Transform::new(&m);
        let mut a = vec![Complex64::new(0.0, 0.0); m.len()];
        a[m.index(&[1, -2])] = Complex64::new(0.5, 0.25);
        let orig = a.clone();
        t.to_physical(&mut a);
        // a plane wave has constant modulus
        for x in &a {
            assert!((x.norm() - orig[m.index(&[1, -2])].norm()).abs() < 1e-14);
        }
        // value at grid point j = (1, 0): e^{2πi·1/8}
        let expect = orig[m.index(&[1, -2])] * Complex64::from_polar(1.0, 2.0 * PI / 8.0);
        assert!((a[1] - expect).norm() < 1e-14);
        t.to_modes(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x / 64.0 - y).norm() < 1e-14);
        }
    }
}
