use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{check_edges, profile_on_modes, random_phases, shell_of};
use super::evolve::evolve_nls;
use super::iterate::{broadened_at_modes, key_of, sinc2_weight, Lattice};
use super::model::TorusModel;
use crate::collision::{f_term, BroadenedTerm};
use crate::error::{KwrError, Result};
use crate::stats::Welford;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub t: f64,
    pub dt: f64,
    pub realizations: usize,
    pub shell_edges: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftShell {
    pub lo: f64,
    pub hi: f64,
    pub modes: usize,
    /// Ensemble mean of the shell-averaged `|A_k(t)|² − |A_k(0)|²`.
    pub measured: f64,
    pub stderr: f64,
    /// `(εγ)² Σ (1 + 1_{k₁≠k₃}) F sin²(tΩ/2)/(Ω/2)²` on the lattice.
    pub lattice: f64,
    /// `ε² (t/π) C_t(ω_k)` from the broadened collision operator.
    pub predicted: f64,
    /// `|predicted| > 3 stderr`.
    pub resolved: bool,
    pub sign_agrees: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftReport {
    pub t: f64,
    pub realizations: usize,
    pub shells: Vec<DriftShell>,
    /// At least one shell is resolved and every resolved shell agrees in sign.
    pub pass: bool,
}

/// Second-order lattice growth of `E|A_k|²` without the `(εγ)²` factor.
fn lattice_drift(lattice: &Lattice, k: usize, t: f64) -> f64 {
    let r0 = lattice.rho[k];
    lattice.sum(k, |r1, r2, r3, diag, omega| {
        let mult = if diag { 1.0 } else { 2.0 };
        mult * f_term([r0, r1, r2, r3]) * sinc2_weight(t, omega)
    })
}

/// Early-time change of the shell spectrum under the full split-step
/// evolution, against the broadened collision operator.
///
/// Each realization is run at `+ε` and `−ε` from the same phases and the two
/// changes are averaged: the odd orders in `ε`, whose `O(ε)` fluctuation would
/// otherwise swamp the `O(ε²)` mean, cancel exactly.
pub fn nonlinear_drift(
    model: &TorusModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    cfg: &DriftConfig,
    seed: u64,
) -> Result<DriftReport> {
    if model.eps == 0.0 {
        return Err(KwrError::domain("the drift needs eps != 0"));
    }
    if cfg.realizations < 2 {
        return Err(KwrError::domain("need at least 2 realizations"));
    }
    if !(cfg.t > 0.0 && cfg.t.is_finite()) {
        return Err(KwrError::domain(format!("t must be positive, got {}", cfg.t)));
    }
    let edges = &cfg.shell_edges;
    check_edges(edges)?;
    let vals = profile_on_modes(model, phi)?;
    let rho: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let shells = shell_of(model, edges);
    let ns = edges.len() - 1;
    let targets: Vec<usize> = (0..model.len()).filter(|i| shells[*i].is_some()).collect();
    let mut modes = vec![0usize; ns];
    for &k in &targets {
        modes[shells[k].expect("target")] += 1;
    }

    let minus = model.with_eps(-model.eps);
    let per_real: Vec<Result<Vec<f64>>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let a0 = random_phases(model, &vals, seed, r as u64 + 1);
            let ap = evolve_nls(&a0, model, cfg.t, cfg.dt)?;
            let am = evolve_nls(&a0, &minus, cfg.t, cfg.dt)?;
            let mut sums = vec![0.0; ns];
            for &k in &targets {
                let s = shells[k].expect("target");
                sums[s] += 0.5 * (ap.amplitudes[k].norm_sqr() + am.amplitudes[k].norm_sqr()) - rho[k];
            }
            Ok(sums)
        })
        .collect();
    let mut acc = vec![Welford::new(); ns];
    for sums in per_real {
        for (j, s) in sums?.into_iter().enumerate() {
            if modes[j] > 0 {
                acc[j].push(s / modes[j] as f64);
            }
        }
    }

    let lattice = Lattice::new(model, phi)?;
    lattice.check_budget(targets.len())?;
    let lat: Vec<f64> = targets.par_iter().map(|&k| lattice_drift(&lattice, k, cfg.t)).collect();
    let full = broadened_at_modes(model, phi, &targets, cfg.t, BroadenedTerm::Full)?;
    let coupling = (model.eps * model.gamma()).powi(2);
    let kinetic = model.eps * model.eps * cfg.t / PI;
    let mut lat_sum = vec![0.0; ns];
    let mut pred_sum = vec![0.0; ns];
    for (&k, l) in targets.iter().zip(&lat) {
        let s = shells[k].expect("target");
        lat_sum[s] += coupling * l;
        pred_sum[s] += kinetic * full[&key_of(model, k)];
    }
    let mut out = Vec::with_capacity(ns);
    let mut resolved_any = false;
    let mut all_agree = true;
    for j in 0..ns {
        let n = modes[j];
        if n == 0 {
            continue;
        }
        let (measured, stderr) = (acc[j].mean, acc[j].stderr());
        let predicted = pred_sum[j] / n as f64;
        let resolved = predicted.abs() > 3.0 * stderr;
        let sign_agrees = measured.signum() == predicted.signum();
        resolved_any |= resolved;
        if resolved && !sign_agrees {
            all_agree = false;
        }
        out.push(DriftShell {
            lo: edges[j],
            hi: edges[j + 1],
            modes: n,
            measured,
            stderr,
            lattice: lat_sum[j] / n as f64,
            predicted,
            resolved,
            sign_agrees,
        });
    }
    Ok(DriftReport { t: cfg.t, realizations: cfg.realizations, shells: out, pass: resolved_any && all_agree })
}
