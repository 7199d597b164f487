use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{profile_on_modes, random_phases};
use super::model::TorusModel;
use crate::error::{KwrError, Result};
use crate::stats::Welford;

/// Two-sided Gaussian tail beyond 3σ, split over the tested quadruples.
const FAMILY_LEVEL: f64 = 0.0027;
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingKind {
    /// `(n, n₂) ∈ {(n₁, n₃), (n₃, n₁)}`: the product is `|φ_n|²|φ_{n₂}|²`.
    Paired,
    /// Every other quadruple: mean zero.
    Unpaired,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingEntry {
    /// Flat mode indices `(n, n₁, n₂, n₃)`.
    pub modes: [usize; 4],
    pub kind: PairingKind,
    pub expected: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    /// Per-component standard error of the complex mean.
    pub stderr: f64,
    /// `|mean − expected| / stderr`; paired products have no variance and
    /// report their relative rounding error instead.
    pub deviation: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingReport {
    pub realizations: usize,
    pub entries: Vec<PairingEntry>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// `E[c̄_n c_{n₁} c̄_{n₂} c_{n₃}]` over prepared data for a fixed set of
/// quadruples built from the four modes with the largest `|φ|`: `(a,a,b,b)`
/// and `(a,b,b,a)` are paired, `(a,b,a,b)`, `(a,a,b,c)`, `(a,b,c,c)` and
/// `(a,b,c,e)` are not.
///
/// Unpaired means are tested with the two-component statistic
/// `|m|²/se² ~ χ²₂` at family level `0.0027` with a Bonferroni split.
pub fn pairing_expectation_check(
    model: &TorusModel,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    n_realizations: usize,
    seed: u64,
) -> Result<PairingReport> {
    if n_realizations < 10_000 {
        return Err(KwrError::domain(format!("need at least 1e4 realizations, got {n_realizations}")));
    }
    let vals = profile_on_modes(model, phi)?;
    let mut order: Vec<usize> = model.retained();
    order.sort_by(|x, y| vals[*y].abs().total_cmp(&vals[*x].abs()).then(x.cmp(y)));
    if order.len() < 4 || vals[order[3]] == 0.0 {
        return Err(KwrError::domain("phi must be nonzero on at least four retained modes"));
    }
    let [a, b, c, e] = [order[0], order[1], order[2], order[3]];
    let quads: Vec<([usize; 4], PairingKind)> = vec![
        ([a, a, b, b], PairingKind::Paired),
        ([a, b, b, a], PairingKind::Paired),
        ([a, b, a, b], PairingKind::Unpaired),
        ([a, a, b, c], PairingKind::Unpaired),
        ([a, b, c, c], PairingKind::Unpaired),
        ([a, b, c, e], PairingKind::Unpaired),
    ];
    let nq = quads.len();
    let chunks = n_realizations.div_ceil(CHUNK);
    let parts: Vec<Vec<(Welford, Welford)>> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut acc = vec![(Welford::new(), Welford::new()); nq];
            let end = ((ch + 1) * CHUNK).min(n_realizations);
            for r in ch * CHUNK..end {
                let f = random_phases(model, &vals, seed, r as u64 + 1);
                let amp = &f.amplitudes;
                for (slot, (q, _)) in acc.iter_mut().zip(&quads) {
                    let z: Complex64 = amp[q[0]].conj() * amp[q[1]] * amp[q[2]].conj() * amp[q[3]];
                    slot.0.push(z.re);
                    slot.1.push(z.im);
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![(Welford::new(), Welford::new()); nq];
    for p in &parts {
        for (x, y) in acc.iter_mut().zip(p) {
            x.0.merge(&y.0);
            x.1.merge(&y.1);
        }
    }
    let unpaired = quads.iter().filter(|q| q.1 == PairingKind::Unpaired).count().max(1);
    let mut entries = Vec::with_capacity(nq);
    for ((modes, kind), (re, im)) in quads.into_iter().zip(acc) {
        let (mean_re, mean_im) = (re.mean, im.mean);
        let stderr = (0.5 * (re.variance() + im.variance()) / re.count as f64).sqrt();
        let entry = match kind {
            PairingKind::Paired => {
                let expected = (vals[modes[0]] * vals[modes[2]]).powi(2);
                let deviation = (mean_re - expected).hypot(mean_im) / expected;
                let pass = deviation <= 1e-12;
                PairingEntry { modes, kind, expected, mean_re, mean_im, stderr, deviation, p_value: f64::NAN, pass }
            }
            PairingKind::Unpaired => {
                let x = (mean_re * mean_re + mean_im * mean_im) / (stderr * stderr);
                let p_value = (-0.5 * x).exp();
                let pass = p_value > FAMILY_LEVEL / unpaired as f64;
                PairingEntry { modes, kind, expected: 0.0, mean_re, mean_im, stderr, deviation: x.sqrt(), p_value, pass }
            }
        };
        entries.push(entry);
    }
    let max_deviation = entries
        .iter()
        .filter(|e| e.kind == PairingKind::Unpaired)
        .map(|e| e.deviation)
        .fold(0.0, f64::max);
    let pass = entries.iter().all(|e| e.pass);
    Ok(PairingReport { realizations: n_realizations, entries, max_deviation, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microsim::data::PhiSpec;
    use crate::Dimension;

    #[test]
    fn pairing_identity_holds() {
        let m = TorusModel::new(Dimension::TWO, 16.0, 32, 0.05).unwrap();
        let phi = PhiSpec::default_gaussian();
        let r = pairing_expectation_check(&m, &|w| phi.eval(w), 10_000, 11).unwrap();
        assert!(r.pass, "{r:#?}");
        assert_eq!(r.entries.len(), 6);
        // (a,b,a,b) averages e^{2i(θ_b − θ_a)}, whose modulus is exactly |φa φb|²
        let abab = &r.entries[2];
        assert!(abab.stderr > 0.0 && abab.mean_re.hypot(abab.mean_im) < 5.0 * abab.stderr);
    }

    #[test]
    fn too_few_realizations_rejected() {
        let m = TorusModel::new(Dimension::TWO, 16.0, 32, 0.05).unwrap();
        let phi = PhiSpec::default_gaussian();
        assert!(pairing_expectation_check(&m, &|w| phi.eval(w), 100, 1).is_err());
    }
}
