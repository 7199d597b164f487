use kwr_core::interaction::FrequencyQuad;
use kwr_core::reduction::{four_sphere_delta_mc, radial_reduction_check, SmoothedDeltaConfig, TestProfile, Verdict};
use kwr_core::Dimension;
use serde::Deserialize;
use serde_json::{json, Value};

use super::Ctx;
use crate::config::parameters;
use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialFixture {
    /// `(ω, ω₁, ω₂, ω₃)`; `ω₁` marks the profile centre.
    quad: [f64; 4],
    width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReductionParams {
    d: Dimension,
    #[serde(default)]
    delta_quads: Vec<[f64; 4]>,
    #[serde(default)]
    radial: Vec<RadialFixture>,
    /// Overrides the default sample count per mollifier width.
    #[serde(default)]
    samples_per_sigma: Option<usize>,
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn with_samples(mut cfg: SmoothedDeltaConfig, n: Option<usize>) -> SmoothedDeltaConfig {
    if let Some(n) = n {
        cfg.samples_per_sigma = n;
    }
    cfg
}

pub fn verify_reduction(ctx: &mut Ctx, p: &Value) -> Result<Value, CliError> {
    let p: ReductionParams = parameters(p)?;
    let mut counts = [0usize; 3];
    let mut tally = |v: Verdict| {
        counts[match v {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }] += 1
    };

    let mut rows = Vec::new();
    for (i, q) in p.delta_quads.iter().enumerate() {
        let quad = FrequencyQuad::from_array(*q)?;
        let cfg = with_samples(SmoothedDeltaConfig::standard(p.d, &quad)?, p.samples_per_sigma);
        let r = four_sphere_delta_mc(p.d, &quad, &cfg, ctx.seed.wrapping_add(i as u64))?;
        tally(r.verdict);
        rows.push(vec![
            num(q[0]),
            num(q[1]),
            num(q[2]),
            num(q[3]),
            num(r.extrapolation.value),
            num(r.extrapolation.stderr),
            num(r.target),
            num(r.z),
            verdict_name(r.verdict).to_string(),
        ]);
    }
    if !rows.is_empty() {
        ctx.out.csv("delta_identity.csv", &["w0", "w1", "w2", "w3", "extrapolated", "stderr", "target", "z", "verdict"], rows)?;
    }

    let mut rows = Vec::new();
    let offset = p.delta_quads.len() as u64;
    for (i, f) in p.radial.iter().enumerate() {
        let quad = FrequencyQuad::from_array(f.quad)?;
        let profile = TestProfile::gaussian(f.quad[1], f.width)?;
        let cfg = with_samples(profile.sigma_config(p.d, &quad)?, p.samples_per_sigma);
        let r = radial_reduction_check(p.d, &quad, &profile, &cfg, ctx.seed.wrapping_add(offset + i as u64))?;
        tally(r.verdict);
        rows.push(vec![
            num(r.omega),
            num(r.omega2),
            num(f.quad[1]),
            num(f.width),
            num(r.kernel_side),
            num(r.extrapolation.value),
            num(r.extrapolation.stderr),
            num(r.relative_discrepancy),
            num(r.z),
            verdict_name(r.verdict).to_string(),
        ]);
    }
    if !rows.is_empty() {
        ctx.out.csv(
            "radial_reduction.csv",
            &["omega", "omega2", "center", "width", "kernel_side", "angular_side", "stderr", "relative_discrepancy", "z", "verdict"],
            rows,
        )?;
    }
    Ok(json!({"pass": counts[0], "fail": counts[1], "inconclusive": counts[2]}))
}
