use kwr_core::microsim::{
    evolve_nls, first_iterate_variance, nonlinear_drift, pairing_expectation_check, prepared_data, shell_average,
    typical_detuning, DriftConfig, EnsembleSpectrum, PhiSpec, TorusModel,
};
use kwr_core::Dimension;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use super::Ctx;
use crate::config::parameters;
use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParams {
    d: Dimension,
    l: f64,
    n_modes: usize,
    eps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum Task {
    /// Shell spectra of an evolved ensemble at `outputs + 1` equally spaced times.
    Ensemble { t_final: f64, dt: f64, realizations: usize, shell_edges: Vec<f64>, outputs: usize },
    Pairing { realizations: usize },
    FirstIterate { t: Option<f64>, shell_edges: Vec<f64> },
    Drift { t: f64, dt: f64, realizations: usize, shell_edges: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MicrosimParams {
    model: ModelParams,
    #[serde(default = "PhiSpec::default_gaussian")]
    phi: PhiSpec,
    task: Task,
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn microsim(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: MicrosimParams = parameters(p)?;
    let m = &p.model;
    let model = TorusModel::new(m.d, m.l, m.n_modes, m.eps)?;
    let spec = p.phi;
    let phi = move |w: f64| spec.eval(w);
    match p.task {
        Task::Ensemble { t_final, dt, realizations, shell_edges, outputs } => {
            ensemble(ctx, &model, &phi, t_final, dt, realizations, &shell_edges, outputs.max(1))
        }
        Task::Pairing { realizations } => {
            let r = pairing_expectation_check(&model, &phi, realizations, ctx.seed)?;
            ctx.out.json("pairing.json", &r)?;
            Ok(json!({"pass": r.pass, "max_deviation": r.max_deviation}))
        }
        Task::FirstIterate { t, shell_edges } => {
            // t·Ω_typ ≈ 20 unless given
            let t = match t {
                Some(t) => t,
                None => 20.0 / typical_detuning(&model, &phi)?,
            };
            let r = first_iterate_variance(&model, &phi, t, &shell_edges)?;
            let rows: Vec<Vec<String>> = r
                .shells
                .iter()
                .map(|s| vec![num(s.lo), num(s.hi), s.modes.to_string(), num(s.measured), num(s.predicted), opt(s.ratio)])
                .collect();
            ctx.out.csv("first_iterate.csv", &["shell_lo", "shell_hi", "modes", "measured", "predicted", "ratio"], rows)?;
            Ok(json!({"t": r.t, "quadruples": r.quadruples, "max_ratio_error": r.max_ratio_error}))
        }
        Task::Drift { t, dt, realizations, shell_edges } => {
            let cfg = DriftConfig { t, dt, realizations, shell_edges };
            let r = nonlinear_drift(&model, &phi, &cfg, ctx.seed)?;
            let rows: Vec<Vec<String>> = r
                .shells
                .iter()
                .map(|s| {
                    vec![
                        num(s.lo),
                        num(s.hi),
                        s.modes.to_string(),
                        num(s.measured),
                        num(s.stderr),
                        num(s.lattice),
                        num(s.predicted),
                        s.resolved.to_string(),
                        s.sign_agrees.to_string(),
                    ]
                })
                .collect();
            ctx.out.csv(
                "drift.csv",
                &["shell_lo", "shell_hi", "modes", "measured", "stderr", "lattice", "predicted", "resolved", "sign_agrees"],
                rows,
            )?;
            Ok(json!({"t": r.t, "realizations": r.realizations, "pass": r.pass}))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn ensemble(
    ctx: &mut Ctx,
    model: &TorusModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    t_final: f64,
    dt: f64,
    realizations: usize,
    edges: &[f64],
    outputs: usize,
) -> Result<Value, CliError> {
    if realizations == 0 || !(t_final >= 0.0) {
        return Err(kwr_core::KwrError::domain("need realizations >= 1 and t_final >= 0").into());
    }
    let times: Vec<f64> = (0..=outputs).map(|j| t_final * j as f64 / outputs as f64).collect();
    let seed = ctx.seed;
    let per_real: Vec<kwr_core::Result<Vec<EnsembleSpectrum>>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut field = prepared_data(model, phi, seed.wrapping_add(r))?;
            let mut out = Vec::with_capacity(times.len());
            for &t in &times {
                if t > field.time {
                    field = evolve_nls(&field, model, t, dt)?;
                }
                out.push(shell_average(&field, model, edges)?);
            }
            Ok(out)
        })
        .collect();
    let mut acc: Option<Vec<EnsembleSpectrum>> = None;
    for spectra in per_real {
        let spectra = spectra?;
        match acc.as_mut() {
            None => acc = Some(spectra),
            Some(a) => {
                for (x, y) in a.iter_mut().zip(&spectra) {
                    x.merge(y)?;
                }
            }
        }
    }
    let acc = acc.expect("realizations >= 1");
    let mut rows = Vec::new();
    for (t, s) in times.iter().zip(&acc) {
        let centers = s.centers();
        for j in 0..s.len() {
            rows.push(vec![
                num(*t),
                num(centers[j]),
                s.modes[j].to_string(),
                opt(s.mean(j)),
                opt(s.stderr(j)),
                s.realizations().to_string(),
            ]);
        }
    }
    ctx.out.csv("spectrum.csv", &["time", "shell_center", "modes", "mean", "stderr", "realizations"], rows)?;
    Ok(json!({"realizations": realizations, "times": times.len(), "seeds": [seed, seed.wrapping_add(realizations as u64 - 1)]}))
}
