//! Time integration of `∂_τ ρ = C[ρ]` with an embedded Dormand–Prince 5(4)
//! pair, conservation diagnostics and a power-law stationarity scanner.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{collision_rhs, FrequencyGrid, KernelTable, SpectralDensity};
use crate::error::{KwrError, Result};
use crate::quadrature::simpson_weights;
use crate::specfun::Dimension;

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub tau: f64,
    pub rho: SpectralDensity,
    pub step_count: u64,
    /// Size of the last accepted step (0 before the first step).
    pub last_step: f64,
    /// Trial size for the next step.
    pub next_step: f64,
}

impl EvolutionState {
    pub fn new(rho: SpectralDensity) -> Self {
        EvolutionState { tau: 0.0, rho, step_count: 0, last_step: 0.0, next_step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationLedger {
    pub tau: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// Bound on the sup norm of the embedded error estimate per step.
    pub tol: f64,
    pub dtau_min: f64,
    pub dtau_max: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { tol: 1e-8, dtau_min: 1e-10, dtau_max: 0.05 }
    }
}

/// `ρ(ωᵢ) = |φ(ωᵢ)|²`.
pub fn initial_density(phi: impl Fn(f64) -> f64, grid: Arc<FrequencyGrid>) -> Result<SpectralDensity> {
    SpectralDensity::from_fn(grid, |w| {
        let p = phi(w);
        p * p
    })
}

/// Mass `∫ ω^{d/2−1} ρ dω` and energy `∫ ω^{d/2} ρ dω` with non-uniform
/// Simpson weights on the grid.
pub fn conservation_ledger(state: &EvolutionState, d: Dimension) -> ConservationLedger {
    let (mass, energy) = moments(&state.rho, d);
    ConservationLedger { tau: state.tau, mass, energy }
}

pub fn moments(rho: &SpectralDensity, d: Dimension) -> (f64, f64) {
    let nodes = rho.grid().nodes();
    let w = simpson_weights(nodes);
    let p = d.as_f64() / 2.0 - 1.0;
    let mut mass = 0.0;
    let mut energy = 0.0;
    for ((x, wi), r) in nodes.iter().zip(&w).zip(rho.values()) {
        let m = wi * x.powf(p) * r;
        mass += m;
        energy += m * x;
    }
    (mass, energy)
}

// Dormand–Prince 5(4) tableau (the problem is autonomous, so the nodes c are unused).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

enum Attempt {
    /// Fifth-order solution and sup norm of the embedded error estimate.
    Done { y5: Vec<f64>, err: f64 },
    /// A stage or the result has a negative value at this node.
    Negative(usize),
}

/// Negative values no deeper than this fraction of `max ρ` are rounding in
/// a far tail that the cascade is filling by many decades per step, and are
/// set to zero instead of rejecting the step.
const NEGATIVE_FLOOR: f64 = 1e-14;

fn first_negative(y: &mut [f64], floor: f64) -> Option<usize> {
    for (i, v) in y.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -floor {
                return Some(i);
            }
            *v = 0.0;
        }
    }
    None
}

/// One Dormand–Prince attempt of size `h` from `rho`, whose derivative is `k1`.
fn attempt(rho: &SpectralDensity, k1: &[f64], h: f64, table: &KernelTable) -> Result<Attempt> {
    let y0 = rho.values();
    let n = y0.len();
    let grid = rho.grid().clone();
    let floor = NEGATIVE_FLOOR * y0.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut k: Vec<Vec<f64>> = vec![k1.to_vec()];
    for s in 1..7 {
        let mut y = y0.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..n {
                    y[i] += h * a * kj[i];
                }
            }
        }
        if let Some(i) = first_negative(&mut y, floor) {
            return Ok(Attempt::Negative(i));
        }
        let stage = SpectralDensity::new(grid.clone(), y)?;
        k.push(collision_rhs(&stage, table)?);
    }
    let mut y5 = y0.to_vec();
    let mut err: f64 = 0.0;
    for i in 0..n {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for s in 0..7 {
            d5 += B5[s] * k[s][i];
            d4 += B4[s] * k[s][i];
        }
        y5[i] += h * d5;
        err = err.max((h * (d5 - d4)).abs());
    }
    if let Some(i) = first_negative(&mut y5, floor) {
        return Ok(Attempt::Negative(i));
    }
    Ok(Attempt::Done { y5, err })
}

/// Advances by one accepted adaptive step.
///
/// The step is rejected (and retried smaller) when the error estimate exceeds
/// `cfg.tol` or when any node would become negative; below `cfg.dtau_min` a
/// [`KwrError::StepUnderflow`] names the offending node.
pub fn step(state: &EvolutionState, table: &KernelTable, cfg: &StepConfig) -> Result<EvolutionState> {
    step_until(state, table, cfg, f64::INFINITY)
}

/// As [`step`], never stepping past `tau_stop`.
pub fn step_until(state: &EvolutionState, table: &KernelTable, cfg: &StepConfig, tau_stop: f64) -> Result<EvolutionState> {
    let k1 = collision_rhs(&state.rho, table)?;
    let mut h = state.next_step.clamp(cfg.dtau_min, cfg.dtau_max);
    let mut bad_node = 0;
    loop {
        let dt = (tau_stop - state.tau).min(h);
        if h < cfg.dtau_min || !(dt > 0.0) {
            return Err(KwrError::StepUnderflow { tau: state.tau, dtau: h, node: bad_node });
        }
        match attempt(&state.rho, &k1, dt, table)? {
            Attempt::Negative(i) => {
                bad_node = i;
                h = 0.5 * dt;
            }
            Attempt::Done { y5, err } => {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * (cfg.tol / err).powf(0.2)).clamp(0.2, 5.0) };
                if err <= cfg.tol {
                    let rho = SpectralDensity::new(state.rho.grid().clone(), y5)?;
                    return Ok(EvolutionState {
                        tau: state.tau + dt,
                        rho,
                        step_count: state.step_count + 1,
                        last_step: dt,
                        next_step: (h * factor).clamp(cfg.dtau_min, cfg.dtau_max),
                    });
                }
                bad_node = argmax_change(&state.rho, &y5);
                h = dt * factor.min(0.9);
            }
        }
    }
}

fn argmax_change(rho: &SpectralDensity, y: &[f64]) -> usize {
    rho.values()
        .iter()
        .zip(y)
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, (a, b))| if (a - b).abs() > bv { (i, (a - b).abs()) } else { (bi, bv) })
        .0
}

/// Integrates to `tau_final`, recording a snapshot every `stride` accepted
/// steps (and always the first and last state).
pub fn evolve(
    state: EvolutionState,
    table: &KernelTable,
    cfg: &StepConfig,
    tau_final: f64,
    stride: usize,
) -> Result<(EvolutionState, Vec<EvolutionState>)> {
    let stride = stride.max(1);
    let mut snapshots = vec![state.clone()];
    let mut s = state;
    while s.tau < tau_final * (1.0 - 1e-14) {
        s = step_until(&s, table, cfg, tau_final)?;
        if s.step_count % stride as u64 == 0 {
            snapshots.push(s.clone());
        }
    }
    if snapshots.last().map(|x| x.step_count) != Some(s.step_count) {
        snapshots.push(s.clone());
    }
    Ok((s, snapshots))
}

/// `n` fixed steps of size `h` with the fifth-order solution (no error
/// control), for order checks.
pub fn integrate_fixed(state: &EvolutionState, table: &KernelTable, h: f64, n: usize) -> Result<EvolutionState> {
    let mut s = state.clone();
    for _ in 0..n {
        let k1 = collision_rhs(&s.rho, table)?;
        let y5 = match attempt(&s.rho, &k1, h, table)? {
            Attempt::Done { y5, .. } => y5,
            Attempt::Negative(node) => return Err(KwrError::StepUnderflow { tau: s.tau, dtau: h, node }),
        };
        s = EvolutionState {
            tau: s.tau + h,
            rho: SpectralDensity::new(s.rho.grid().clone(), y5)?,
            step_count: s.step_count + 1,
            last_step: h,
            next_step: h,
        };
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResidual {
    pub x: f64,
    /// Weighted L² norm of `C[ω^{−x}]` over the interior nodes.
    pub residual: f64,
    /// Same norm of the summed magnitudes of gain and loss contributions.
    pub scale: f64,
    /// `residual / scale`.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub points: Vec<StationarityResidual>,
    pub local_minima: Vec<StationarityResidual>,
}

/// Fraction of the grid (by node count) excluded at each end of the residual.
pub const BOUNDARY_MARGIN: f64 = 0.2;

/// `ω^{−x}` on the grid, optionally tapered to zero over the first and last
/// `taper` fraction of the grid coordinate by a C^∞ step.
pub fn power_law_density(grid: Arc<FrequencyGrid>, x: f64, taper: f64) -> Result<SpectralDensity> {
    let u0 = grid.coordinate(grid.omega_min());
    let u1 = grid.coordinate(grid.omega_max());
    let g = grid.clone();
    SpectralDensity::from_fn(grid, move |w| {
        let base = w.powf(-x);
        if taper <= 0.0 {
            return base;
        }
        let u = (g.coordinate(w) - u0) / (u1 - u0);
        base * smooth_step(u / taper) * smooth_step((1.0 - u) / taper)
    })
}

fn smooth_step(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / z).exp();
        let b = (-1.0 / (1.0 - z)).exp();
        a / (a + b)
    }
}

/// Residual of the power law `ρ = ω^{−x}` (sharply clipped to the table's
/// domain) over the interior nodes, with weights `ω^{d/2−1}` times Simpson
/// weights.
pub fn stationarity_residual(d: Dimension, x: f64, grid: Arc<FrequencyGrid>, table: &KernelTable) -> Result<StationarityResidual> {
    stationarity_residual_tapered(d, x, grid, table, 0.0)
}

pub fn stationarity_residual_tapered(
    d: Dimension,
    x: f64,
    grid: Arc<FrequencyGrid>,
    table: &KernelTable,
    taper: f64,
) -> Result<StationarityResidual> {
    use rayon::prelude::*;
    if table.dimension() != d {
        return Err(KwrError::TableMismatch("table dimension differs".into()));
    }
    let rho = power_law_density(grid.clone(), x, taper)?;
    let n = grid.len();
    let margin = (BOUNDARY_MARGIN * n as f64).ceil() as usize;
    let sw = simpson_weights(grid.nodes());
    let p = d.as_f64() / 2.0 - 1.0;
    let idx: Vec<usize> = (margin..n.saturating_sub(margin)).filter(|i| table.row(*i).is_some()).collect();
    if idx.is_empty() {
        return Err(KwrError::domain("no interior table rows outside the boundary margin"));
    }
    let parts: Vec<(f64, f64, f64)> = idx
        .par_iter()
        .map(|&i| {
            let row = table.row(i).expect("filtered");
            let w = sw[i] * grid.nodes()[i].powf(p);
            let c = row.apply(&rho);
            let a = row.apply_abs(&rho);
            (w, w * c * c, w * a * a)
        })
        .collect();
    let wsum: f64 = parts.iter().map(|p| p.0).sum();
    let residual = (parts.iter().map(|p| p.1).sum::<f64>() / wsum).sqrt();
    let scale = (parts.iter().map(|p| p.2).sum::<f64>() / wsum).sqrt();
    Ok(StationarityResidual { x, residual, scale, relative: residual / scale })
}

/// Relative residuals for `x = x_lo, x_lo + dx, …, x_hi` and their local minima.
pub fn stationarity_scan(
    d: Dimension,
    grid: Arc<FrequencyGrid>,
    table: &KernelTable,
    x_lo: f64,
    x_hi: f64,
    dx: f64,
) -> Result<ScanReport> {
    if !(dx > 0.0 && x_hi >= x_lo) {
        return Err(KwrError::domain("scan needs dx > 0 and x_hi >= x_lo"));
    }
    let count = ((x_hi - x_lo) / dx + 1e-9).floor() as usize + 1;
    let points = (0..count)
        .map(|k| stationarity_residual(d, x_lo + k as f64 * dx, grid.clone(), table))
        .collect::<Result<Vec<_>>>()?;
    let local_minima = (1..points.len().saturating_sub(1))
        .filter(|&k| points[k].relative < points[k - 1].relative && points[k].relative < points[k + 1].relative)
        .map(|k| points[k])
        .collect();
    Ok(ScanReport { points, local_minima })
}
