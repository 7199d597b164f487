use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::SpectralDensity;
use super::table::pieces;
use super::{f_term, kernel_closed, kstar_prefactor, support_cutoff};
use crate::error::{KwrError, Result};
use crate::quadrature::{graded_edges, GaussLegendre};
use crate::specfun::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BroadenedTerm {
    /// The full cubic `F`.
    Full,
    /// Only `ρ₁ρ₂ρ₃`.
    Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadenedConfig {
    /// Gauss points per `(ω₁, ω₂)` panel.
    pub gl_points: usize,
    pub interior_panels: usize,
    pub max_panel_width: f64,
    pub grading_levels: usize,
    /// Width of the `Ω` panels on which the off-shell integral is sampled.
    pub omega_panel_width: f64,
    /// Gauss points per `Ω` panel.
    pub omega_points: usize,
    /// Sub-panels for the `sinc²` weight are at most this fraction of `2π/t`.
    pub period_fraction: f64,
    pub omega_cut: Option<f64>,
    pub term: BroadenedTerm,
}

impl Default for BroadenedConfig {
    fn default() -> Self {
        BroadenedConfig {
            gl_points: 8,
            interior_panels: 2,
            max_panel_width: 1.0,
            grading_levels: 4,
            omega_panel_width: 0.5,
            omega_points: 8,
            period_fraction: 0.25,
            omega_cut: None,
            term: BroadenedTerm::Full,
        }
    }
}

/// `(1 − cos tΩ) / (π t Ω²) = (1/2πt) sin²(tΩ/2) / (Ω/2)²`; unit mass in `Ω`.
#[inline]
pub fn sinc2_kernel(t: f64, omega: f64) -> f64 {
    let x = 0.5 * t * omega;
    if x.abs() < 1e-4 {
        t / (2.0 * PI) * (1.0 - x * x / 3.0)
    } else {
        let s = x.sin();
        t / (2.0 * PI) * (s * s) / (x * x)
    }
}

/// `∭ K̃(ω,ω₁,ω₂,ω₃) F (1/2πt) sin²(tΩ/2)/(Ω/2)² dω₁dω₂dω₃` over
/// `[ω_lo, ω_cut]³`, with `ω_lo` the grid minimum and `ω_cut` from the config
/// or [`support_cutoff`].
pub fn broadened_collision_operator(
    d: Dimension,
    rho: &SpectralDensity,
    omega: f64,
    t: f64,
    cfg: &BroadenedConfig,
) -> Result<f64> {
    Ok(broadened_collision_series(d, rho, omega, &[t], cfg)?[0])
}

/// [`broadened_collision_operator`] at several times sharing one off-shell
/// table `H(ω, Ω)` (see [`off_shell_collision`]): the result is
/// `∫ sinc²_t(Ω) H(ω, Ω) dΩ` with `H` interpolated on Gauss panels in `Ω`,
/// graded toward `Ω = 0`.
pub fn broadened_collision_series(
    d: Dimension,
    rho: &SpectralDensity,
    omega: f64,
    times: &[f64],
    cfg: &BroadenedConfig,
) -> Result<Vec<f64>> {
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(KwrError::domain(format!("broadening time must be positive, got {t}")));
    }
    let table = OffShellTable::build(d, rho, omega, cfg, false)?;
    let gl = GaussLegendre::get(8);
    Ok(times
        .iter()
        .map(|&t| {
            let width = cfg.period_fraction * 2.0 * PI / t;
            table.panels.iter().map(|p| p.weighted(&gl, width, |x| sinc2_kernel(t, x))).sum()
        })
        .collect())
}

/// Dense `∭ |K̃ F| dω₁dω₂dω₃` over the same cube; bounds the broadened
/// operator by `t/(2π)` times this value.
pub fn broadened_l1_norm(d: Dimension, rho: &SpectralDensity, omega: f64, cfg: &BroadenedConfig) -> Result<f64> {
    let table = OffShellTable::build(d, rho, omega, cfg, true)?;
    Ok(table.panels.iter().map(|p| p.values.iter().zip(&p.weights).map(|(v, w)| v * w).sum::<f64>()).sum())
}

/// `H(ω, Ω) = ∬ K̃(ω, ω₁, ω₂, ω₃) F dω₁dω₂` on the slice
/// `ω₃ = ω − ω₁ + ω₂ − Ω` of the cube. `H(ω, 0)` is the sharp operator.
pub fn off_shell_collision(d: Dimension, rho: &SpectralDensity, omega: f64, big_omega: f64, cfg: &BroadenedConfig) -> Result<f64> {
    let s = Slice::new(d, rho, omega, cfg)?;
    s.value(big_omega, false)
}

struct Slice<'a> {
    d: Dimension,
    rho: &'a SpectralDensity,
    omega: f64,
    lo: f64,
    cut: f64,
    pref: f64,
    skip: f64,
    cfg: &'a BroadenedConfig,
    gl: std::sync::Arc<GaussLegendre>,
}

impl<'a> Slice<'a> {
    fn new(d: Dimension, rho: &'a SpectralDensity, omega: f64, cfg: &'a BroadenedConfig) -> Result<Self> {
        if d.get() == 1 {
            return Err(KwrError::domain("the collision kernel is not defined for d=1"));
        }
        let grid = rho.grid();
        if !(omega >= grid.omega_min() && omega <= grid.omega_max()) {
            return Err(KwrError::domain(format!("omega={omega} outside the grid range")));
        }
        let cut = cfg.omega_cut.unwrap_or_else(|| support_cutoff(rho)).min(grid.omega_max());
        let max = rho.values().iter().cloned().fold(0.0, f64::max);
        Ok(Slice {
            d,
            rho,
            omega,
            lo: grid.omega_min(),
            cut,
            pref: kstar_prefactor(d),
            // outer nodes this far below max ρ add nothing to the gain term
            skip: 1e-16 * max,
            cfg,
            gl: GaussLegendre::get(cfg.gl_points),
        })
    }

    fn nodes(&self, a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (s, e) in pieces(a, b, breaks) {
            let interior = self.cfg.interior_panels.max(((e - s) / self.cfg.max_panel_width).ceil() as usize);
            for p in graded_edges(s, e, interior, true, true, self.cfg.grading_levels).windows(2) {
                out.extend(self.gl.mapped(p[0], p[1]));
            }
        }
        out
    }

    fn value(&self, big: f64, abs: bool) -> Result<f64> {
        let (w0, lo, cut) = (self.omega, self.lo, self.cut);
        let k0 = w0.sqrt();
        let r0 = self.rho.eval(w0);
        let mut total = 0.0;
        for (w2, c2) in self.nodes(lo, cut, &[w0, cut + lo - w0 + big]) {
            let r2 = self.rho.eval(w2);
            if self.cfg.term == BroadenedTerm::Gain && r2 <= self.skip {
                continue;
            }
            let a = lo.max(w0 + w2 - big - cut);
            let b = cut.min(w0 + w2 - big - lo);
            if b <= a {
                continue;
            }
            let k2 = w2.sqrt();
            let breaks = singular_k1(k0, k2, big);
            let mut inner = 0.0;
            for (w1, c1) in self.nodes(a, b, &breaks) {
                let w3 = w0 - w1 + w2 - big;
                let (r1, r3) = (self.rho.eval(w1), self.rho.eval(w3));
                let f = match self.cfg.term {
                    BroadenedTerm::Full => f_term([r0, r1, r2, r3]),
                    BroadenedTerm::Gain => r1 * r2 * r3,
                };
                if f == 0.0 {
                    continue;
                }
                let k = kernel_closed(self.d, self.pref, &[k0, w1.sqrt(), k2, w3.sqrt()]);
                inner += c1 * if abs { (k * f).abs() } else { k * f };
            }
            total += c2 * inner;
        }
        if !total.is_finite() {
            return Err(KwrError::Convergence {
                reason: format!("off-shell quadrature produced a non-finite value at Ω={big}"),
                partial: total,
                last_increment: f64::INFINITY,
            });
        }
        Ok(total)
    }
}

/// `ω₁ = k₁²` where `k₀ ± k₁ ± k₂ ± k₃ = 0` on the slice, `k₃² = k₀² − k₁² + k₂² − Ω`.
fn singular_k1(k0: f64, k2: f64, big: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for b in [k0 + k2, k0 - k2] {
        // 2k₁² + 2 b s k₁ + (b² − k₀² − k₂² + Ω) = 0
        let c = b * b - k0 * k0 - k2 * k2 + big;
        let disc = 4.0 * b * b - 8.0 * c;
        if disc < 0.0 {
            continue;
        }
        for s in [1.0, -1.0] {
            for r in [1.0, -1.0] {
                let k1 = (-2.0 * b * s + r * disc.sqrt()) / 4.0;
                if k1 > 0.0 {
                    out.push(k1 * k1);
                }
            }
        }
    }
    out
}

struct OmegaPanel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    bary: Vec<f64>,
    a: f64,
    b: f64,
}

impl OmegaPanel {
    fn interpolate(&self, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((xj, wj), vj) in self.nodes.iter().zip(&self.bary).zip(&self.values) {
            let dx = x - xj;
            if dx == 0.0 {
                return *vj;
            }
            let c = wj / dx;
            num += c * vj;
            den += c;
        }
        num / den
    }

    /// `∫ₐᵇ w(x) H(x) dx` with `H` interpolated, on sub-panels of at most `width`.
    fn weighted(&self, gl: &GaussLegendre, width: f64, w: impl Fn(f64) -> f64) -> f64 {
        let n = ((self.b - self.a) / width).ceil().max(1.0) as usize;
        let h = (self.b - self.a) / n as f64;
        (0..n)
            .map(|i| {
                let s = self.a + h * i as f64;
                gl.integrate(s, s + h, |x| w(x) * self.interpolate(x))
            })
            .sum()
    }
}

struct OffShellTable {
    panels: Vec<OmegaPanel>,
}

impl OffShellTable {
    fn build(d: Dimension, rho: &SpectralDensity, omega: f64, cfg: &BroadenedConfig, abs: bool) -> Result<Self> {
        let slice = Slice::new(d, rho, omega, cfg)?;
        let (lo, cut) = (slice.lo, slice.cut);
        let (min, max) = (omega - 2.0 * cut + lo, omega + cut - 2.0 * lo);
        // Ω at the cube corners, where the slice changes shape
        let mut breaks = vec![0.0];
        for c1 in [lo, cut] {
            for c2 in [lo, cut] {
                for c3 in [lo, cut] {
                    breaks.push(omega - c1 + c2 - c3);
                }
            }
        }
        let gl = GaussLegendre::get(cfg.omega_points);
        let mut edges = Vec::new();
        for (s, e) in pieces(min, max, &breaks) {
            let interior = ((e - s) / cfg.omega_panel_width).ceil().max(1.0) as usize;
            let (gl_left, gl_right) = (s == 0.0, e == 0.0);
            let pts = graded_edges(s, e, interior, gl_left, gl_right, cfg.grading_levels);
            edges.extend(pts.windows(2).map(|p| (p[0], p[1])));
        }
        let nodes: Vec<(usize, f64, f64)> = edges
            .iter()
            .enumerate()
            .flat_map(|(i, (a, b))| gl.mapped(*a, *b).map(move |(x, w)| (i, x, w)).collect::<Vec<_>>())
            .collect();
        let values: Vec<Result<f64>> = nodes.par_iter().map(|(_, x, _)| slice.value(*x, abs)).collect();
        let bary = barycentric(&gl.nodes);
        let mut panels: Vec<OmegaPanel> = edges
            .iter()
            .map(|(a, b)| OmegaPanel { nodes: vec![], weights: vec![], values: vec![], bary: bary.clone(), a: *a, b: *b })
            .collect();
        for ((i, x, w), v) in nodes.into_iter().zip(values) {
            let p = &mut panels[i];
            p.nodes.push(x);
            p.weights.push(w);
            p.values.push(v?);
        }
        Ok(OffShellTable { panels })
    }
}

/// Barycentric weights of the nodes (affine maps only rescale them).
fn barycentric(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| 1.0 / (0..x.len()).filter(|m| *m != j).map(|m| x[j] - x[m]).product::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::collision::FrequencyGrid;

    #[test]
    fn sinc2_kernel_has_unit_mass_and_peak() {
        let t = 7.0;
        assert!((sinc2_kernel(t, 0.0) - t / (2.0 * PI)).abs() < 1e-15);
        let gl = GaussLegendre::get(16);
        let mut s = 0.0;
        let h = PI / t;
        for j in -4000..4000 {
            let a = j as f64 * h;
            s += gl.integrate(a, a + h, |x| sinc2_kernel(t, x));
        }
        // tails beyond |Ω| = 4000π/t contribute 2/(π t Ω) ≈ 1.6e-4
        assert!((s - 1.0).abs() < 2e-4, "{s}");
    }

    #[test]
    fn singular_points_reduce_to_resonant_lines() {
        let mut v = singular_k1(1.3, 0.7, 0.0);
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(v.len(), 2);
        assert!((v[0] - 0.49).abs() < 1e-12 && (v[1] - 1.69).abs() < 1e-12);
        // and each one is singular off-shell too
        for w1 in singular_k1(1.3, 0.7, 0.4) {
            let k3 = (1.69 - w1 + 0.49 - 0.4f64).sqrt();
            let k1 = w1.sqrt();
            let hit = [1.0, -1.0].iter().any(|a| {
                [1.0, -1.0].iter().any(|b| [1.0, -1.0].iter().any(|c| (1.3 + a * k1 + b * 0.7 + c * k3).abs() < 1e-9))
            });
            assert!(hit, "{w1}");
        }
    }

    #[test]
    fn interpolated_panels_integrate_polynomials_exactly() {
        let gl = GaussLegendre::get(8);
        let mapped: Vec<(f64, f64)> = gl.mapped(-1.0, 2.0).collect();
        let p = |x: f64| 1.0 + x - 2.0 * x.powi(5) + 0.1 * x.powi(7);
        let panel = OmegaPanel {
            nodes: mapped.iter().map(|n| n.0).collect(),
            weights: mapped.iter().map(|n| n.1).collect(),
            values: mapped.iter().map(|n| p(n.0)).collect(),
            bary: barycentric(&gl.nodes),
            a: -1.0,
            b: 2.0,
        };
        for x in [-0.9, 0.0, 0.37, 1.99] {
            assert!((panel.interpolate(x) - p(x)).abs() < 1e-10);
        }
        let exact = |x: f64| x + x * x / 2.0 - x.powi(6) / 3.0 + 0.1 * x.powi(8) / 8.0;
        assert!((panel.weighted(&gl, 0.1, |_| 1.0) - (exact(2.0) - exact(-1.0))).abs() < 1e-10);
    }

    #[test]
    fn off_shell_at_zero_matches_the_sharp_operator() {
        use crate::collision::{collision_operator, KernelTable, TableConfig};
        let grid = Arc::new(FrequencyGrid::uniform(1e-3, 6.0, 121).unwrap());
        let rho = SpectralDensity::from_fn(grid.clone(), |w| (-(w - 2.0f64).powi(2)).exp()).unwrap();
        for d in [Dimension::TWO, Dimension::THREE] {
            let table = KernelTable::build_rows(d, grid.clone(), TableConfig::default(), &[]).unwrap();
            let sharp = collision_operator(d, &rho, 2.0, &table).unwrap();
            let h = off_shell_collision(d, &rho, 2.0, 0.0, &BroadenedConfig::default()).unwrap();
            assert!((h - sharp).abs() < 1e-4 * sharp.abs().max(1e-3), "d={} {h} {sharp}", d.get());
        }
    }
}
