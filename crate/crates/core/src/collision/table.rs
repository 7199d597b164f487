use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::SpectralDensity;
use super::grid::{FrequencyGrid, GridLocation};
use super::{f_term, kernel_closed, kstar_prefactor};
use crate::error::{KwrError, Result};
use crate::quadrature::{graded_edges, GaussLegendre};
use crate::specfun::Dimension;

/// Layout of the `(ω₁, ω₂)` quadrature behind each table row.
///
/// Each of the (at most three) intervals between breakpoints is covered by
/// `interior_panels` uniform panels (more if wider than `max_panel_width`)
/// plus `grading_levels` geometrically shrinking panels at both ends. A row is
/// refined by doubling the interior panels and adding a grading level until
/// it agrees with the next finer layout on `∬K̃` to `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub gl_points: usize,
    pub interior_panels: usize,
    pub max_panel_width: f64,
    pub grading_levels: usize,
    pub tol: f64,
    pub max_refinements: usize,
    /// Upper truncation of `ω₁, ω₂, ω₃`; `None` means the grid maximum.
    pub omega_cut: Option<f64>,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            gl_points: 6,
            interior_panels: 1,
            max_panel_width: 2.0,
            grading_levels: 3,
            tol: 1e-6,
            max_refinements: 2,
            omega_cut: None,
        }
    }
}

impl TableConfig {
    /// A cheap layout, adequate when `F` nearly cancels pointwise.
    pub fn coarse() -> Self {
        TableConfig {
            gl_points: 6,
            interior_panels: 1,
            max_panel_width: 4.0,
            grading_levels: 3,
            tol: 1e-3,
            max_refinements: 0,
            omega_cut: None,
        }
    }

    pub fn with_cut(mut self, omega_cut: f64) -> Self {
        self.omega_cut = Some(omega_cut);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.gl_points < 2 || self.gl_points > 64 {
            return Err(KwrError::domain("gl_points must lie in [2, 64]"));
        }
        if self.interior_panels == 0 || !(self.max_panel_width > 0.0) || !(self.tol > 0.0) {
            return Err(KwrError::domain("table layout parameters must be positive"));
        }
        Ok(())
    }
}

/// Quadrature nodes of one row: outer `ω₂` nodes, and for each of them a run
/// of inner `ω₁` nodes with the combined weight `w₁ w₂ K̃` premultiplied.
/// Grid locations of `ω₁`, `ω₂` and `ω₃` are cached for fast interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub omega: f64,
    pub outer: Vec<f64>,
    pub starts: Vec<u32>,
    pub inner: Vec<f64>,
    pub weights: Vec<f64>,
    loc_omega: GridLocation,
    loc_outer: Vec<GridLocation>,
    loc_inner: Vec<GridLocation>,
    loc_third: Vec<GridLocation>,
}

impl KernelRow {
    pub(super) fn new(omega: f64, outer: Vec<f64>, starts: Vec<u32>, inner: Vec<f64>, weights: Vec<f64>, grid: &FrequencyGrid) -> Self {
        let loc_outer = outer.iter().map(|w| grid.locate(*w)).collect();
        let loc_inner = inner.iter().map(|w| grid.locate(*w)).collect();
        let mut loc_third = Vec::with_capacity(inner.len());
        for (j, &w2) in outer.iter().enumerate() {
            for e in starts[j] as usize..starts[j + 1] as usize {
                loc_third.push(grid.locate(omega + w2 - inner[e]));
            }
        }
        KernelRow {
            omega,
            loc_omega: grid.locate(omega),
            outer,
            starts,
            inner,
            weights,
            loc_outer,
            loc_inner,
            loc_third,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    /// `Σ w K̃ F` over the row.
    pub fn apply(&self, rho: &SpectralDensity) -> f64 {
        let r0 = rho.eval_loc(self.loc_omega);
        let mut acc = 0.0;
        for (j, loc2) in self.loc_outer.iter().enumerate() {
            let r2 = rho.eval_loc(*loc2);
            let (a, b) = (self.starts[j] as usize, self.starts[j + 1] as usize);
            let mut part = 0.0;
            for e in a..b {
                let f = f_term([r0, rho.eval_loc(self.loc_inner[e]), r2, rho.eval_loc(self.loc_third[e])]);
                part += self.weights[e] * f;
            }
            acc += part;
        }
        acc
    }

    /// `Σ |w K̃| (|ρ₁ρ₂ρ₃| + |ρ₀ρ₂ρ₃| + |ρ₀ρ₁ρ₃| + |ρ₀ρ₁ρ₂|)`: the size of the
    /// individual gain and loss contributions that `apply` lets cancel.
    pub fn apply_abs(&self, rho: &SpectralDensity) -> f64 {
        let r0 = rho.eval_loc(self.loc_omega);
        let mut acc = 0.0;
        for (j, loc2) in self.loc_outer.iter().enumerate() {
            let r2 = rho.eval_loc(*loc2);
            for e in self.starts[j] as usize..self.starts[j + 1] as usize {
                let r1 = rho.eval_loc(self.loc_inner[e]);
                let r3 = rho.eval_loc(self.loc_third[e]);
                acc += self.weights[e].abs() * (r1 * r2 * r3 + r0 * (r2 * r3 + r1 * r3 + r1 * r2));
            }
        }
        acc
    }

    /// `∬ K̃ dω₁ dω₂` over the truncated domain.
    pub fn kernel_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(ω₁, ω₂, w K̃)` triples.
    pub fn entries(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.outer.iter().enumerate().flat_map(move |(j, &w2)| {
            let (a, b) = (self.starts[j] as usize, self.starts[j + 1] as usize);
            (a..b).map(move |e| (self.inner[e], w2, self.weights[e]))
        })
    }
}

/// Precomputed quadrature rows of `K̃(ω, ω₁, ω₂)` for each grid node up to
/// the cutoff. Immutable once built.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub(super) d: Dimension,
    pub(super) prefactor: f64,
    pub(super) grid: Arc<FrequencyGrid>,
    pub(super) config: TableConfig,
    pub(super) omega_cut: f64,
    pub(super) rows: Vec<Option<KernelRow>>,
}

impl KernelTable {
    pub fn build(d: Dimension, grid: Arc<FrequencyGrid>, config: TableConfig) -> Result<Self> {
        let indices: Vec<usize> = (0..grid.len()).collect();
        Self::build_rows(d, grid, config, &indices)
    }

    /// Builds only the listed rows; the others are left empty.
    pub fn build_rows(d: Dimension, grid: Arc<FrequencyGrid>, config: TableConfig, indices: &[usize]) -> Result<Self> {
        if d.get() == 1 {
            return Err(KwrError::domain("the collision kernel is not defined for d=1"));
        }
        config.validate()?;
        let omega_cut = config.omega_cut.unwrap_or(grid.omega_max()).min(grid.omega_max());
        if omega_cut <= grid.omega_min() {
            return Err(KwrError::domain(format!("cutoff {omega_cut} at or below the grid minimum")));
        }
        let mut table = KernelTable {
            d,
            prefactor: kstar_prefactor(d),
            grid: grid.clone(),
            config,
            omega_cut,
            rows: vec![None; grid.len()],
        };
        let built: Vec<(usize, Result<KernelRow>)> = indices
            .par_iter()
            .filter(|&&i| i < grid.len() && grid.nodes()[i] <= omega_cut)
            .map(|&i| (i, table.build_row(grid.nodes()[i])))
            .collect();
        for (i, row) in built {
            table.rows[i] = Some(row?);
        }
        Ok(table)
    }

    pub fn dimension(&self) -> Dimension {
        self.d
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn config(&self) -> &TableConfig {
        &self.config
    }

    pub fn omega_cut(&self) -> f64 {
        self.omega_cut
    }

    pub fn row(&self, i: usize) -> Option<&KernelRow> {
        self.rows.get(i).and_then(|r| r.as_ref())
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &KernelRow)> {
        self.rows.iter().enumerate().filter_map(|(i, r)| r.as_ref().map(|r| (i, r)))
    }

    pub fn total_entries(&self) -> usize {
        self.rows().map(|(_, r)| r.len()).sum()
    }

    /// `K̃(ω, ω₁, ω₂)` with `ω₃ = ω − ω₁ + ω₂`.
    pub fn kernel_at(&self, omega: f64, w1: f64, w2: f64) -> f64 {
        let w3 = omega - w1 + w2;
        kernel_closed(self.d, self.prefactor, &[omega.sqrt(), w1.sqrt(), w2.sqrt(), w3.sqrt()])
    }

    pub(super) fn check_compatible(&self, d: Dimension, rho: &SpectralDensity) -> Result<()> {
        if d != self.d {
            return Err(KwrError::TableMismatch(format!("table built for d={}, requested d={}", self.d.get(), d.get())));
        }
        if rho.grid().hash() != self.grid.hash() {
            return Err(KwrError::TableMismatch("density grid differs from the table grid".into()));
        }
        Ok(())
    }

    /// Row for an arbitrary `ω ∈ [ω_lo, ω_cut]`, refined to the configured tolerance.
    pub fn build_row(&self, omega: f64) -> Result<KernelRow> {
        let mut prev = self.layout_row(omega, 0)?;
        for level in 1..=self.config.max_refinements {
            let next = self.layout_row(omega, level)?;
            let (a, b) = (prev.kernel_mass(), next.kernel_mass());
            if (a - b).abs() <= self.config.tol * b.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            prev = next;
        }
        Ok(prev)
    }

    fn layout_row(&self, omega: f64, level: usize) -> Result<KernelRow> {
        let lo = self.grid.omega_min();
        let cut = self.omega_cut;
        let gl = GaussLegendre::get(self.config.gl_points);
        let mut outer_nodes = Vec::new();
        for (a, b) in pieces(lo, cut, &[omega, cut - omega + lo]) {
            for (x, w) in self.panel_nodes(&gl, a, b, level) {
                outer_nodes.push((x, w));
            }
        }
        let mut outer = Vec::with_capacity(outer_nodes.len());
        let mut starts = vec![0u32];
        let mut inner = Vec::new();
        let mut weights = Vec::new();
        let k0 = omega.sqrt();
        for (w2, wt2) in outer_nodes {
            let a = lo.max(omega + w2 - cut);
            let b = cut.min(omega + w2 - lo);
            if b > a {
                let k2 = w2.sqrt();
                for (s, t) in pieces(a, b, &[omega, w2]) {
                    for (w1, wt1) in self.panel_nodes(&gl, s, t, level) {
                        let w3 = omega + w2 - w1;
                        let k = kernel_closed(self.d, self.prefactor, &[k0, w1.sqrt(), k2, w3.sqrt()]);
                        if !k.is_finite() {
                            return Err(KwrError::Convergence {
                                reason: format!("kernel not finite at (ω, ω₁, ω₂) = ({omega}, {w1}, {w2})"),
                                partial: k,
                                last_increment: f64::INFINITY,
                            });
                        }
                        inner.push(w1);
                        weights.push(wt1 * wt2 * k);
                    }
                }
            }
            outer.push(w2);
            starts.push(inner.len() as u32);
        }
        Ok(KernelRow::new(omega, outer, starts, inner, weights, &self.grid))
    }

    fn panel_nodes(&self, gl: &GaussLegendre, a: f64, b: f64, level: usize) -> Vec<(f64, f64)> {
        let by_width = ((b - a) / self.config.max_panel_width).ceil() as usize;
        let interior = self.config.interior_panels.max(by_width) << level;
        let edges = graded_edges(a, b, interior, true, true, self.config.grading_levels + level);
        edges.windows(2).flat_map(|e| gl.mapped(e[0], e[1]).collect::<Vec<_>>()).collect()
    }
}

/// Splits `[a, b]` at the breakpoints that fall strictly inside it.
pub(super) fn pieces(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let eps = 1e-12 * (b - a).abs().max(1e-300);
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().cloned().filter(|x| *x > a + eps && *x < b - eps).collect();
    inner.sort_by(f64::total_cmp);
    for x in inner {
        if x > pts[pts.len() - 1] + eps {
            pts.push(x);
        }
    }
    pts.push(b);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}
