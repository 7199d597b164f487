//! Monte-Carlo cross-checks of the radial equation against the angular
//! form of the classical kinetic equation, and the monochromatic random-wave
//! sampler behind `Λ_d`.

mod delta;
mod extrapolate;
mod radial;
mod wave;

pub use delta::{four_sphere_delta_mc, identity_target, singular_distance, DeltaMcReport, SigmaLevel, SmoothedDeltaConfig, SphereSampleBatch};
pub use extrapolate::{extrapolate_sigma, Extrapolation};
pub use radial::{radial_reduction_check, ReductionReport, TestProfile};
pub use wave::{sample_monochromatic_wave, two_point_correlation, MonochromaticWave};

use serde::{Deserialize, Serialize};

/// Outcome of a statistical consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The Monte-Carlo error is too large for the comparison to mean anything.
    Inconclusive,
}

/// Consistency at three combined standard errors.
pub(crate) fn verdict(estimate: f64, stderr: f64, target: f64, target_err: f64) -> (f64, Verdict) {
    let se = stderr.hypot(target_err);
    let diff = (estimate - target).abs();
    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    // an exact zero on both sides passes without a variance estimate
    let pass = diff <= 3.0 * se || diff <= 1e-300;
    (z, if pass { Verdict::Pass } else { Verdict::Fail })
}

/// `exp(-x) I₀(x)` for `x ≥ 0`.
pub(crate) fn bessel_i0_scaled(x: f64) -> f64 {
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // large-argument series; the first omitted term is below 1e-11
        let t = 1.0 / (8.0 * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=6 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd * t / k as f64;
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}
