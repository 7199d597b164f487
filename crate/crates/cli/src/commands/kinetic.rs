use kwr_core::collision::{broadened_collision_series, collision_operator, collision_rhs, BroadenedConfig};
use kwr_core::solver::{conservation_ledger, evolve as evolve_kwr, stationarity_scan, EvolutionState, StepConfig};
use kwr_core::{Dimension, KwrError};
use serde::Deserialize;
use serde_json::{json, Value};

use super::Ctx;
use crate::config::parameters;
use crate::error::CliError;
use crate::output::num;
use crate::params::{DensitySpec, GridSpec, TableSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CollisionParams {
    d: Dimension,
    grid: GridSpec,
    density: DensitySpec,
    #[serde(default)]
    table: TableSpec,
    /// Evaluation points; all grid nodes when absent.
    #[serde(default)]
    omegas: Option<Vec<f64>>,
    /// Times for the sinc²-broadened operator at the same points.
    #[serde(default)]
    broadened_times: Vec<f64>,
}

pub fn collision(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: CollisionParams = parameters(p)?;
    let grid = p.grid.build()?;
    let rho = p.density.sample(grid.clone())?;
    let table = p.table.load(p.d, grid.clone())?;
    let (omegas, sharp) = match &p.omegas {
        None => (grid.nodes().to_vec(), collision_rhs(&rho, &table)?),
        Some(ws) => {
            let vals = ws.iter().map(|&w| collision_operator(p.d, &rho, w, &table)).collect::<Result<Vec<_>, _>>()?;
            (ws.clone(), vals)
        }
    };
    let broadened = if p.broadened_times.is_empty() {
        Vec::new()
    } else {
        let cfg = BroadenedConfig::default();
        omegas
            .iter()
            .map(|&w| broadened_collision_series(p.d, &rho, w, &p.broadened_times, &cfg))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut header = vec!["omega".to_string(), "rho".to_string(), "collision".to_string()];
    header.extend(p.broadened_times.iter().map(|t| format!("broadened_t{}", num(*t))));
    let rows: Vec<Vec<f64>> = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut r = vec![w, rho.eval(w), sharp[i]];
            if let Some(b) = broadened.get(i) {
                r.extend(b);
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.numeric_csv("collision.csv", &header, &rows)?;
    Ok(json!({"points": omegas.len(), "table_entries": table.total_entries()}))
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolveParams {
    d: Dimension,
    grid: GridSpec,
    initial: DensitySpec,
    tau_final: f64,
    #[serde(default)]
    step: StepConfig,
    #[serde(default = "default_stride")]
    stride: usize,
    #[serde(default)]
    table: TableSpec,
}

pub fn evolve(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: EvolveParams = parameters(p)?;
    if !(p.tau_final >= 0.0 && p.tau_final.is_finite()) {
        return Err(KwrError::domain(format!("tau_final must be finite and >= 0, got {}", p.tau_final)).into());
    }
    let grid = p.grid.build()?;
    let rho0 = p.initial.sample(grid.clone())?;
    let table = p.table.load(p.d, grid.clone())?;
    let (last, snaps) = evolve_kwr(EvolutionState::new(rho0.clone()), &table, &p.step, p.tau_final, p.stride)?;
    let rows: Vec<Vec<f64>> = snaps
        .iter()
        .map(|s| {
            let c = conservation_ledger(s, p.d);
            vec![s.tau, s.step_count as f64, c.mass, c.energy]
        })
        .collect();
    ctx.out.numeric_csv("snapshots.csv", &["tau", "steps", "mass", "energy"], &rows)?;
    let rows: Vec<Vec<f64>> = grid
        .nodes()
        .iter()
        .zip(rho0.values().iter().zip(last.rho.values()))
        .map(|(w, (a, b))| vec![*w, *a, *b])
        .collect();
    ctx.out.numeric_csv("final.csv", &["omega", "rho_initial", "rho_final"], &rows)?;

    let sup0 = rho0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = rho0.values().iter().zip(last.rho.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let (c0, c1) = (conservation_ledger(&EvolutionState::new(rho0), p.d), conservation_ledger(&last, p.d));
    let rel = |a: f64, b: f64| if a != 0.0 { (b - a).abs() / a.abs() } else { (b - a).abs() };
    Ok(json!({
        "steps": last.step_count,
        "tau": last.tau,
        "sup_norm_drift": if sup0 > 0.0 { diff / sup0 } else { diff },
        "mass_drift": rel(c0.mass, c1.mass),
        "energy_drift": rel(c0.energy, c1.energy),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanParams {
    d: Dimension,
    grid: GridSpec,
    #[serde(default)]
    table: TableSpec,
    x_lo: f64,
    x_hi: f64,
    dx: f64,
}

pub fn scan_kz(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: ScanParams = parameters(p)?;
    let grid = p.grid.build()?;
    let table = p.table.load(p.d, grid.clone())?;
    let r = stationarity_scan(p.d, grid, &table, p.x_lo, p.x_hi, p.dx)?;
    let rows: Vec<Vec<f64>> = r.points.iter().map(|s| vec![s.x, s.residual, s.scale, s.relative]).collect();
    ctx.out.numeric_csv("scan.csv", &["x", "residual", "scale", "relative"], &rows)?;
    Ok(json!({"local_minima": r.local_minima.iter().map(|s| json!({"x": s.x, "relative": s.relative})).collect::<Vec<_>>()}))
}
