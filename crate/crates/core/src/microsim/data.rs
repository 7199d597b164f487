use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{ModeField, TorusModel};
use crate::error::{KwrError, Result};
use crate::rng::stream_rng;
use crate::stats::Welford;

/// Radial amplitude profiles `φ(ω)` for prepared data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    /// `a·exp(−(ω−c)²/(2w²))`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// `a·exp(−1/(1−x²))`, `x` the affine coordinate of `[lo, hi]`.
    Bump { lo: f64, hi: f64, amplitude: f64 },
}

impl PhiSpec {
    /// `exp(−(ω−2)²/2)`, so that `ρ = φ² = exp(−(ω−2)²)`.
    pub fn default_gaussian() -> Self {
        PhiSpec::Gaussian { center: 2.0, width: 1.0, amplitude: 1.0 }
    }

    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            PhiSpec::Gaussian { center, width, amplitude } => {
                amplitude * (-(w - center).powi(2) / (2.0 * width * width)).exp()
            }
            PhiSpec::Bump { lo, hi, amplitude } => {
                let x = (w - 0.5 * (lo + hi)) / (0.5 * (hi - lo));
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (-1.0 / (1.0 - x * x)).exp()
                }
            }
        }
    }
}

/// `φ` on every mode (zero outside the retained band), after checking that it
/// is negligible on the outermost retained shell.
pub(crate) fn profile_on_modes(model: &TorusModel, phi: &(dyn Fn(f64) -> f64 + Sync)) -> Result<Vec<f64>> {
    let c = model.cutoff();
    let mut vals = vec![0.0; model.len()];
    let (mut max, mut edge) = (0.0f64, 0.0f64);
    for (i, v) in vals.iter_mut().enumerate() {
        if !model.is_retained(i) {
            continue;
        }
        let p = phi(model.omega(i));
        if !p.is_finite() {
            return Err(KwrError::domain(format!("phi is not finite at omega={}", model.omega(i))));
        }
        *v = p;
        max = max.max(p.abs());
        if model.mode(i).iter().take(model.dim()).any(|m| m.abs() == c) {
            edge = edge.max(p.abs());
        }
    }
    if edge > 1e-8 * max {
        return Err(KwrError::Truncation(format!(
            "|phi| reaches {edge:e} on the truncation edge (max {max:e}); increase n_modes"
        )));
    }
    Ok(vals)
}

/// `A_k = φ(ω_k) e^{iθ_k}` on the retained modes with i.i.d. uniform phases
/// drawn in index order from `(seed, stream 0)`.
pub fn prepared_data(model: &TorusModel, phi: &(dyn Fn(f64) -> f64 + Sync), seed: u64) -> Result<ModeField> {
    let vals = profile_on_modes(model, phi)?;
    Ok(random_phases(model, &vals, seed, 0))
}

/// Realization `stream` of the prepared ensemble with moduli `vals`.
pub(crate) fn random_phases(model: &TorusModel, vals: &[f64], seed: u64, stream: u64) -> ModeField {
    let mut rng = stream_rng(seed, stream);
    let mut field = ModeField::zeros(model);
    for (i, a) in field.amplitudes.iter_mut().enumerate() {
        if model.is_retained(i) {
            let theta: f64 = rng.random::<f64>() * 2.0 * PI;
            *a = Complex64::from_polar(vals[i], theta);
        }
    }
    field
}

/// `B_k = A_k e^{2iεγ𝔪t}` with `𝔪` the field's own mass.
pub fn wick_shift(field: &ModeField, model: &TorusModel, t: f64) -> ModeField {
    let phase = Complex64::from_polar(1.0, 2.0 * model.eps * model.gamma() * field.mass() * t);
    ModeField { amplitudes: field.amplitudes.iter().map(|a| a * phase).collect(), time: field.time }
}

/// Shell means of `|A_k|²` over realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpectrum {
    pub shell_edges: Vec<f64>,
    /// Retained modes per shell.
    pub modes: Vec<usize>,
    /// Per-shell statistics of the realization-wise shell mean.
    pub stats: Vec<Welford>,
}

impl EnsembleSpectrum {
    pub fn realizations(&self) -> u64 {
        self.stats.iter().map(|s| s.count).max().unwrap_or(0)
    }

    /// `None` for empty shells.
    pub fn mean(&self, shell: usize) -> Option<f64> {
        (self.modes[shell] > 0).then(|| self.stats[shell].mean)
    }

    pub fn stderr(&self, shell: usize) -> Option<f64> {
        (self.modes[shell] > 0).then(|| self.stats[shell].stderr())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.shell_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn merge(&mut self, other: &EnsembleSpectrum) -> Result<()> {
        if self.shell_edges != other.shell_edges {
            return Err(KwrError::domain("cannot merge spectra with different shells"));
        }
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            a.merge(b);
        }
        Ok(())
    }
}

pub(crate) fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(KwrError::domain("shell edges must be finite and strictly increasing"));
    }
    Ok(())
}

/// Shell of each retained mode, `None` outside `[e₀, e_last)`.
pub(crate) fn shell_of(model: &TorusModel, edges: &[f64]) -> Vec<Option<usize>> {
    (0..model.len())
        .map(|i| {
            if !model.is_retained(i) {
                return None;
            }
            let w = model.omega(i);
            if w < edges[0] || w >= edges[edges.len() - 1] {
                return None;
            }
            Some(edges.partition_point(|e| *e <= w) - 1)
        })
        .collect()
}

/// Bins `|A_k|²` by `ω_k` into `[eᵢ, eᵢ₊₁)`; one realization.
pub fn shell_average(field: &ModeField, model: &TorusModel, shell_edges: &[f64]) -> Result<EnsembleSpectrum> {
    check_edges(shell_edges)?;
    let values: Vec<f64> = field.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    Ok(shell_average_values(&values, model, shell_edges))
}

pub(crate) fn shell_average_values(values: &[f64], model: &TorusModel, edges: &[f64]) -> EnsembleSpectrum {
    let ns = edges.len() - 1;
    let mut sums = vec![0.0; ns];
    let mut modes = vec![0usize; ns];
    for (i, s) in shell_of(model, edges).into_iter().enumerate() {
        if let Some(s) = s {
            sums[s] += values[i];
            modes[s] += 1;
        }
    }
    let stats = sums
        .iter()
        .zip(&modes)
        .map(|(s, m)| {
            let mut w = Welford::new();
            if *m > 0 {
                w.push(s / *m as f64);
            }
            w
        })
        .collect();
    EnsembleSpectrum { shell_edges: edges.to_vec(), modes, stats }
}
