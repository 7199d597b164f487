use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{check_edges, profile_on_modes, shell_of};
use super::model::TorusModel;
use crate::collision::{broadened_collision_series, BroadenedConfig, BroadenedTerm, FrequencyGrid, SpectralDensity};
use crate::error::{KwrError, Result};
use crate::interaction::OMEGA_MIN;

/// Cap on `|support|² × targets` in the quadruple enumeration.
pub const MAX_QUADRUPLES: u64 = 2_000_000_000;

/// Modes below this fraction of `max ρ` are left out of lattice sums.
const SUPPORT_FLOOR: f64 = 1e-16;

/// `sin²(tΩ/2)/(Ω/2)² = |∫₀ᵗ e^{isΩ} ds|²`.
pub fn sinc2_weight(t: f64, omega: f64) -> f64 {
    let x = 0.5 * t * omega;
    if x.abs() < 1e-4 {
        t * t * (1.0 - x * x / 3.0)
    } else {
        let s = x.sin() / x;
        t * t * s * s
    }
}

/// Modes carrying `ρ = φ²` and the targets binned into shells.
pub(crate) struct Lattice<'a> {
    model: &'a TorusModel,
    pub(crate) rho: Vec<f64>,
    support: Vec<usize>,
    in_support: Vec<bool>,
}

impl<'a> Lattice<'a> {
    pub(crate) fn new(model: &'a TorusModel, phi: &(dyn Fn(f64) -> f64 + Sync)) -> Result<Self> {
        let rho: Vec<f64> = profile_on_modes(model, phi)?.iter().map(|p| p * p).collect();
        let max = rho.iter().cloned().fold(0.0, f64::max);
        let in_support: Vec<bool> = rho.iter().map(|r| max > 0.0 && *r >= SUPPORT_FLOOR * max).collect();
        let support = (0..model.len()).filter(|i| in_support[*i]).collect();
        Ok(Lattice { model, rho, support, in_support })
    }

    pub(crate) fn check_budget(&self, targets: usize) -> Result<u64> {
        let n = (self.support.len() as u64).pow(2) * targets as u64;
        if n > MAX_QUADRUPLES {
            return Err(KwrError::Resource(format!(
                "{n} candidate quadruples exceed the budget of {MAX_QUADRUPLES}; reduce L or the support of phi"
            )));
        }
        Ok(n)
    }

    /// `Σ term(ρ₁, ρ₂, ρ₃, k₁ = k₃, Ω)` over ordered `(k₁, k₃)` from the
    /// support with `k₂ = k₁ + k₃ − k` retained, supported and different from
    /// `k₁` and `k₃`.
    pub(crate) fn sum(&self, k: usize, term: impl Fn(f64, f64, f64, bool, f64) -> f64) -> f64 {
        let m = self.model;
        let d = m.dim();
        let mk = m.mode(k);
        let wk = m.omega(k);
        let c = m.cutoff();
        let mut total = 0.0;
        for &i1 in &self.support {
            let m1 = m.mode(i1);
            for &i3 in &self.support {
                let m3 = m.mode(i3);
                let mut m2 = [0i64; 2];
                let mut ok = true;
                for a in 0..d {
                    m2[a] = m1[a] + m3[a] - mk[a];
                    ok &= m2[a].abs() <= c;
                }
                if !ok {
                    continue;
                }
                let i2 = m.index(&m2[..d]);
                if !self.in_support[i2] || i2 == i1 || i2 == i3 {
                    continue;
                }
                let omega = wk - m.omega(i1) + m.omega(i2) - m.omega(i3);
                total += term(self.rho[i1], self.rho[i2], self.rho[i3], i1 == i3, omega);
            }
        }
        total
    }
}

/// Broadened operator at every distinct `ω_k` of `targets` (keyed by `|m|²`),
/// for `ρ = φ²` sampled on a fine uniform grid.
pub(crate) fn broadened_at_modes(
    model: &TorusModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    targets: &[usize],
    t: f64,
    term: BroadenedTerm,
) -> Result<BTreeMap<i64, f64>> {
    let keys: BTreeMap<i64, f64> = targets
        .iter()
        .map(|&i| {
            let m = model.mode(i);
            (m.iter().take(model.dim()).map(|x| x * x).sum::<i64>(), model.omega(i))
        })
        .collect();
    let hi_target = keys.values().cloned().fold(0.0, f64::max);
    let hi_support = model
        .retained()
        .into_iter()
        .filter(|&i| phi(model.omega(i)).abs() > 0.0)
        .map(|i| model.omega(i))
        .fold(0.0, f64::max);
    let hi = 1.05 * hi_target.max(hi_support).max(10.0 * OMEGA_MIN);
    let grid = Arc::new(FrequencyGrid::uniform(OMEGA_MIN, hi, 801)?);
    let rho = SpectralDensity::from_fn(grid, |w| phi(w).powi(2))?;
    let cfg = BroadenedConfig { term, ..BroadenedConfig::default() };
    let d = model.d;
    let values: Vec<(i64, Result<f64>)> = keys
        .par_iter()
        .map(|(&key, &w)| (key, broadened_collision_series(d, &rho, w.max(OMEGA_MIN), &[t], &cfg).map(|v| v[0])))
        .collect();
    let mut out = BTreeMap::new();
    for (key, v) in values {
        out.insert(key, v?);
    }
    Ok(out)
}

/// `ρ₀ρ₁ρ₂ρ₃`-weighted RMS of the detuning `Ω` over non-degenerate lattice
/// quadruples with every mode in the support of `φ`.
pub fn typical_detuning(model: &TorusModel, phi: &(dyn Fn(f64) -> f64 + Sync)) -> Result<f64> {
    let lattice = Lattice::new(model, phi)?;
    let targets = lattice.support.clone();
    lattice.check_budget(targets.len())?;
    let (num, den) = targets
        .par_iter()
        .map(|&k| {
            let r0 = lattice.rho[k];
            let num = lattice.sum(k, |r1, r2, r3, _, omega| r0 * r1 * r2 * r3 * omega * omega);
            let den = lattice.sum(k, |r1, r2, r3, _, _| r0 * r1 * r2 * r3);
            (num, den)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if den <= 0.0 {
        return Err(KwrError::domain("phi supports no non-degenerate quadruple"));
    }
    Ok((num / den).sqrt())
}

pub(crate) fn key_of(model: &TorusModel, i: usize) -> i64 {
    model.mode(i).iter().take(model.dim()).map(|x| x * x).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstIterateShell {
    pub lo: f64,
    pub hi: f64,
    pub modes: usize,
    /// Shell mean of `E|B¹_k|²`.
    pub measured: f64,
    /// Shell mean of `L^{2d} (t/π) C_t^{gain}(ω_k)`.
    pub predicted: f64,
    /// `None` for empty shells.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstIterateReport {
    pub t: f64,
    pub quadruples: u64,
    pub shells: Vec<FirstIterateShell>,
    /// `max |ratio − 1|` over nonempty shells.
    pub max_ratio_error: f64,
}

/// `E|B¹_k(t)|² = Σ (1 + 1_{k₁≠k₃}) ρ₁ρ₂ρ₃ sin²(tΩ/2)/(Ω/2)²` over ordered
/// non-degenerate `k − k₁ + k₂ − k₃ = 0`, `ρ = φ²`, plus `ρ_k³ t²` from the
/// self-interaction `−|c_k|²c_k` that survives the Wick shift. The phase average is
/// taken in closed form through the pairing rule, so the result carries no
/// sampling error. It is compared per shell against the gain part of the
/// broadened collision operator, which the lattice sum approaches as
/// `L^{2d} (t/π) C_t^{gain}(ω_k)`.
pub fn first_iterate_variance(
    model: &TorusModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    shell_edges: &[f64],
) -> Result<FirstIterateReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(KwrError::domain(format!("t must be positive, got {t}")));
    }
    check_edges(shell_edges)?;
    let lattice = Lattice::new(model, phi)?;
    let shells = shell_of(model, shell_edges);
    let targets: Vec<usize> = (0..model.len()).filter(|i| shells[*i].is_some()).collect();
    let quadruples = lattice.check_budget(targets.len())?;
    let measured: Vec<f64> = targets
        .par_iter()
        .map(|&k| {
            let nondegenerate = lattice.sum(k, |r1, r2, r3, diag, omega| {
                let mult = if diag { 1.0 } else { 2.0 };
                mult * r1 * r2 * r3 * sinc2_weight(t, omega)
            });
            nondegenerate + lattice.rho[k].powi(3) * t * t
        })
        .collect();
    let gain = broadened_at_modes(model, phi, &targets, t, BroadenedTerm::Gain)?;
    let scale = model.l.powi(2 * model.d.get() as i32) * t / PI;

    let ns = shell_edges.len() - 1;
    let mut acc = vec![(0usize, 0.0, 0.0); ns];
    for (&k, m) in targets.iter().zip(&measured) {
        let s = shells[k].expect("target in a shell");
        acc[s].0 += 1;
        acc[s].1 += m;
        acc[s].2 += scale * gain[&key_of(model, k)];
    }
    let mut out = Vec::with_capacity(ns);
    let mut max_ratio_error: f64 = 0.0;
    for (j, (n, m, p)) in acc.into_iter().enumerate() {
        let (measured, predicted) = if n > 0 { (m / n as f64, p / n as f64) } else { (f64::NAN, f64::NAN) };
        let ratio = (n > 0).then(|| measured / predicted);
        if let Some(r) = ratio {
            max_ratio_error = max_ratio_error.max((r - 1.0).abs());
        }
        out.push(FirstIterateShell { lo: shell_edges[j], hi: shell_edges[j + 1], modes: n, measured, predicted, ratio });
    }
    Ok(FirstIterateReport { t, quadruples, shells: out, max_ratio_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microsim::data::PhiSpec;
    use crate::Dimension;

    #[test]
    fn single_circle_grows_like_t_squared_with_the_resonant_count() {
        // φ = 1 exactly on |m|² = 25, where every quadruple is resonant
        let m = TorusModel::new(Dimension::TWO, 8.0, 32, 0.1).unwrap();
        let w25 = (2.0 * PI / 8.0).powi(2) * 25.0;
        let phi = move |w: f64| if (w - w25).abs() < 1e-9 { 1.0 } else { 0.0 };
        let circle: Vec<[i64; 2]> = (-5i64..=5)
            .flat_map(|a| (-5i64..=5).map(move |b| [a, b]))
            .filter(|v| v[0] * v[0] + v[1] * v[1] == 25)
            .collect();
        assert_eq!(circle.len(), 12);
        // brute force over all triples on the circle
        let k = [3i64, 4];
        let mut count = 0.0;
        for a in &circle {
            for b in &circle {
                for c in &circle {
                    if a[0] - b[0] + c[0] == k[0] && a[1] - b[1] + c[1] == k[1] && b != a && b != c {
                        count += if a == c { 1.0 } else { 2.0 };
                    }
                }
            }
        }
        assert!(count > 0.0);
        let lattice = Lattice::new(&m, &phi).unwrap();
        for t in [0.01, 1.0, 50.0] {
            let v = lattice.sum(m.index(&k), |r1, r2, r3, diag, om| {
                assert_eq!(om, 0.0);
                (if diag { 1.0 } else { 2.0 }) * r1 * r2 * r3 * sinc2_weight(t, om)
            });
            assert!((v / (t * t) - count).abs() < 1e-9 * count, "{t}");
        }
    }

    #[test]
    fn small_time_limit_counts_every_quadruple() {
        let m = TorusModel::new(Dimension::TWO, 4.0, 32, 0.1).unwrap();
        let p = PhiSpec::default_gaussian();
        let phi = move |w: f64| p.eval(w);
        let lattice = Lattice::new(&m, &phi).unwrap();
        let k = m.index(&[1, 0]);
        let t = 1e-3;
        let v = lattice.sum(k, |r1, r2, r3, diag, om| (if diag { 1.0 } else { 2.0 }) * r1 * r2 * r3 * sinc2_weight(t, om));
        // independent brute force over triples of retained modes
        let rho = |i: usize| phi(m.omega(i)).powi(2);
        let mut s = 0.0;
        let ret = m.retained();
        for &a in &ret {
            for &c in &ret {
                let (ma, mc) = (m.mode(a), m.mode(c));
                let mb = [ma[0] + mc[0] - 1, ma[1] + mc[1]];
                if mb[0].abs() > m.cutoff() || mb[1].abs() > m.cutoff() {
                    continue;
                }
                let b = m.index(&mb);
                if b == a || b == c {
                    continue;
                }
                s += (if a == c { 1.0 } else { 2.0 }) * rho(a) * rho(b) * rho(c);
            }
        }
        assert!((v / (t * t) / s - 1.0).abs() < 1e-6, "{} {}", v / (t * t), s);
    }

    #[test]
    fn budget_is_enforced() {
        let m = TorusModel::new(Dimension::TWO, 16.0, 64, 0.1).unwrap();
        let p = PhiSpec::default_gaussian();
        let lattice = Lattice::new(&m, &move |w| p.eval(w)).unwrap();
        assert!(lattice.check_budget(10).is_ok());
        assert!(matches!(lattice.check_budget(usize::MAX / 1_000_000), Err(KwrError::Resource(_))));
    }

    #[test]
    fn result_does_not_depend_on_eps() {
        let p = PhiSpec::default_gaussian();
        let edges = [1.0, 2.0, 3.0];
        let a = TorusModel::new(Dimension::TWO, 4.0, 32, 0.1).unwrap();
        let r1 = first_iterate_variance(&a, &move |w| p.eval(w), 2.0, &edges).unwrap();
        let r2 = first_iterate_variance(&a.with_eps(3.0), &move |w| p.eval(w), 2.0, &edges).unwrap();
        for (x, y) in r1.shells.iter().zip(&r2.shells) {
            assert!(x.measured == y.measured || (x.measured.is_nan() && y.measured.is_nan()));
        }
    }
}
