use kwr_core::interaction::{interaction_integral, interaction_integral_closed, FrequencyQuad};
use kwr_core::specfun::{lambda_d, RadialArgument};
use kwr_core::spectrum_synth::{
    kinetic_constant, kinetic_time, regime_validator_with_factor, sum_to_integral_check, weyl_eigenvalues, CompactFunction,
    Generation, ManifoldModel, REGIME_FACTOR,
};
use kwr_core::{Dimension, KwrError};
use serde::Deserialize;
use serde_json::{json, Value};

use super::Ctx;
use crate::config::parameters;
use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LambdaParams {
    d: Dimension,
    q_min: f64,
    q_max: f64,
    points: usize,
    /// Extra evaluation points reported in the summary.
    #[serde(default)]
    spots: Vec<f64>,
}

pub fn lambda(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: LambdaParams = parameters(p)?;
    if p.points < 2 || !(p.q_max > p.q_min) {
        return Err(KwrError::domain("need points >= 2 and q_max > q_min").into());
    }
    let mut rows = Vec::with_capacity(p.points);
    for i in 0..p.points {
        let q = p.q_min + (p.q_max - p.q_min) * i as f64 / (p.points - 1) as f64;
        rows.push(vec![q, lambda_d(p.d, RadialArgument::new(q)?)]);
    }
    let col = format!("lambda_{}", p.d.get());
    ctx.out.numeric_csv("lambda.csv", &["q", &col], &rows)?;
    let spots = p
        .spots
        .iter()
        .map(|&q| Ok(json!({"q": q, "value": lambda_d(p.d, RadialArgument::new(q)?)})))
        .collect::<Result<Vec<_>, KwrError>>()?;
    Ok(json!({"points": p.points, "spots": spots}))
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionParams {
    d: Dimension,
    quads: Vec<[f64; 4]>,
    #[serde(default = "default_tol")]
    tol: f64,
}

pub fn interaction(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: InteractionParams = parameters(p)?;
    let mut rows = Vec::with_capacity(p.quads.len());
    let mut worst: f64 = 0.0;
    for q in &p.quads {
        let quad = FrequencyQuad::from_array(*q)?;
        let r = interaction_integral(p.d, &quad, p.tol)?;
        let closed = if p.d.get() >= 2 { interaction_integral_closed(p.d, &quad)? } else { f64::NAN };
        if closed.is_finite() && closed != 0.0 {
            worst = worst.max(((r.value - closed) / closed).abs());
        }
        rows.push(vec![q[0], q[1], q[2], q[3], r.value, r.abs_error_estimate, closed]);
    }
    ctx.out.numeric_csv("interaction.csv", &["w0", "w1", "w2", "w3", "value", "abs_error_estimate", "closed_form"], &rows)?;
    Ok(json!({"quads": p.quads.len(), "max_relative_difference_to_closed_form": worst}))
}

fn default_factor() -> f64 {
    REGIME_FACTOR
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeParams {
    d: Dimension,
    l: f64,
    eps: f64,
    #[serde(default = "default_factor")]
    factor: f64,
}

pub fn regime(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: RegimeParams = parameters(p)?;
    let v = regime_validator_with_factor(p.l, p.eps, p.d, p.factor)?;
    let report = json!({
        "verdict": if v.kinetic { "kinetic" } else { "not-kinetic" },
        "margins": [v.m1, v.m2],
        "factor": v.factor,
        "kinetic_time": kinetic_time(p.eps),
    });
    ctx.out.json("regime.json", &report)?;
    Ok(report)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    d: Dimension,
    #[serde(default = "one")]
    volume: f64,
    l: f64,
    n: usize,
    #[serde(default)]
    jittered: bool,
    /// Support of the smooth bump used for the sum-to-integral check.
    chi: [f64; 2],
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    t: Option<f64>,
}

fn one() -> f64 {
    1.0
}

pub fn spectrum(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: SpectrumParams = parameters(p)?;
    let model = ManifoldModel::new(p.d, p.volume, p.l)?;
    let generation = if p.jittered { Generation::WeylJittered { seed: ctx.seed } } else { Generation::WeylDeterministic };
    let spec = weyl_eigenvalues(&model, p.n, generation)?;
    let chi = CompactFunction::bump(p.chi[0], p.chi[1])?;
    let error = sum_to_integral_check(&spec, &chi)?;

    let top = *spec.eigenvalues.last().expect("n >= 1");
    let rows: Vec<Vec<String>> = (1..=20)
        .map(|j| {
            let lam = top * j as f64 / 20.0;
            vec![num(lam), num(spec.counting_ratio(lam))]
        })
        .collect();
    ctx.out.csv("counting.csv", &["lambda", "count_over_weyl"], rows)?;
    ctx.out.numeric_csv("eigenvalues.csv", &["n", "lambda"], &spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i as f64, *l])
        .collect::<Vec<_>>())?;
    let mut summary = json!({
        "sum_to_integral_relative_error": error,
        "zeta": model.zeta(),
        "gamma": model.gamma_coupling(),
    });
    if let (Some(eps), Some(t)) = (p.eps, p.t) {
        summary["kinetic_constant"] = serde_json::to_value(kinetic_constant(&model, eps, t))?;
    }
    ctx.out.json("spectrum.json", &summary)?;
    Ok(summary)
}
