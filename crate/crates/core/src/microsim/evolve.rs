use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{ModeField, TorusModel, Transform};
use crate::error::{KwrError, Result};

/// Largest admissible `dt · max ω_k`.
pub const MAX_PHASE_STEP: f64 = 0.5;

const MASS_DRIFT_LIMIT: f64 = 1e-8;
const MAX_ITER: usize = 60;

/// Strang split step: exact linear phase `e^{−iω_k h/2}` on both sides of a
/// nonlinear substep `dA/dt = −iεγ P[|v|²v]`, `v = Σ A_k e^{2πik·x}` sampled on
/// the `N^d` grid and projected back onto the 2/3 band.
///
/// The nonlinear substep is the implicit midpoint rule (solved by fixed-point
/// iteration), which keeps `Σ|A_k|²` invariant exactly. The pointwise phase
/// rotation `v ↦ v e^{−iεγh|v|²}` would lose mass in the projection.
pub fn evolve_nls(field: &ModeField, model: &TorusModel, t_final: f64, dt: f64) -> Result<ModeField> {
    if field.amplitudes.len() != model.len() {
        return Err(KwrError::domain("field does not match the model grid"));
    }
    if !field.is_finite() {
        return Err(KwrError::domain("field contains non-finite amplitudes"));
    }
    if !(dt > 0.0 && dt * model.max_omega() <= MAX_PHASE_STEP) {
        return Err(KwrError::domain(format!(
            "dt={dt} does not resolve the fastest retained phase (need dt*max_omega <= {MAX_PHASE_STEP})"
        )));
    }
    let span = t_final - field.time;
    if !(span >= 0.0 && span.is_finite()) {
        return Err(KwrError::domain(format!("t_final={t_final} precedes the field time {}", field.time)));
    }
    let steps = (span / dt).ceil() as usize;
    if steps == 0 {
        return Ok(field.clone());
    }
    let h = span / steps as f64;
    let retained = model.retained();
    let half: Vec<Complex64> = retained.iter().map(|&i| Complex64::from_polar(1.0, -0.5 * h * model.omega(i))).collect();
    let full: Vec<Complex64> = half.iter().map(|p| p * p).collect();

    let mut a: Vec<Complex64> = retained.iter().map(|&i| field.amplitudes[i]).collect();
    let mass0: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let mut nl = Nonlinear::new(model, &retained);
    for (x, p) in a.iter_mut().zip(&half) {
        *x *= p;
    }
    for s in 0..steps {
        if model.eps != 0.0 {
            nl.midpoint_step(&mut a, h)?;
        }
        let phase = if s + 1 == steps { &half } else { &full };
        for (x, p) in a.iter_mut().zip(phase) {
            *x *= p;
        }
    }
    let mass1: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    if mass0 > 0.0 && (mass1 / mass0 - 1.0).abs() > MASS_DRIFT_LIMIT {
        return Err(KwrError::StepSize(format!(
            "relative mass drift {:e} exceeds {MASS_DRIFT_LIMIT:e}; reduce dt",
            mass1 / mass0 - 1.0
        )));
    }
    let mut out = ModeField::zeros(model);
    for (&i, x) in retained.iter().zip(&a) {
        out.amplitudes[i] = *x;
    }
    out.time = t_final;
    Ok(out)
}

/// Successive step-halving differences of [`evolve_nls`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrangOrder {
    pub dt: f64,
    /// `‖A_{dt} − A_{dt/2}‖₂`.
    pub coarse: f64,
    /// `‖A_{dt/2} − A_{dt/4}‖₂`.
    pub fine: f64,
    /// `coarse / fine`, 4 for a second-order method.
    pub ratio: f64,
}

/// Self-convergence of the split step from `field` to `t_final` at `dt`,
/// `dt/2`, `dt/4`.
pub fn strang_order(field: &ModeField, model: &TorusModel, t_final: f64, dt: f64) -> Result<StrangOrder> {
    let a = evolve_nls(field, model, t_final, dt)?;
    let b = evolve_nls(field, model, t_final, dt / 2.0)?;
    let c = evolve_nls(field, model, t_final, dt / 4.0)?;
    let dist = |x: &ModeField, y: &ModeField| -> f64 {
        x.amplitudes.iter().zip(&y.amplitudes).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
    };
    let (coarse, fine) = (dist(&a, &b), dist(&b, &c));
    if fine == 0.0 {
        return Err(KwrError::domain("step halving changed nothing; the nonlinearity is inactive"));
    }
    Ok(StrangOrder { dt, coarse, fine, ratio: coarse / fine })
}

/// Workspace for `−iεγ P[|v|²v]` on the retained modes.
pub(crate) struct Nonlinear<'a> {
    retained: &'a [usize],
    transform: Transform,
    grid: Vec<Complex64>,
    coeff: f64,
    mid: Vec<Complex64>,
    rhs: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl<'a> Nonlinear<'a> {
    pub(crate) fn new(model: &TorusModel, retained: &'a [usize]) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Nonlinear {
            retained,
            transform: Transform::new(model),
            grid: vec![zero; model.len()],
            coeff: model.eps * model.gamma() / model.len() as f64,
            mid: vec![zero; retained.len()],
            rhs: vec![zero; retained.len()],
            next: vec![zero; retained.len()],
        }
    }

    /// `P[|v|²v]` for `v` built from the retained amplitudes `b`, unscaled.
    pub(crate) fn cubic(&mut self, b: &[Complex64], out: &mut [Complex64]) {
        self.grid.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
        for (&i, x) in self.retained.iter().zip(b) {
            self.grid[i] = *x;
        }
        self.transform.to_physical(&mut self.grid);
        for v in self.grid.iter_mut() {
            *v *= v.norm_sqr();
        }
        self.transform.to_modes(&mut self.grid);
        for (&i, o) in self.retained.iter().zip(out.iter_mut()) {
            *o = self.grid[i];
        }
    }

    /// `A⁺ = A + h f((A + A⁺)/2)`, `f = −iεγ P[|v|²v]`.
    fn midpoint_step(&mut self, a: &mut [Complex64], h: f64) -> Result<()> {
        let scale = Complex64::new(0.0, -h * self.coeff);
        let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        self.next.copy_from_slice(a);
        for it in 0..MAX_ITER {
            for ((m, x), y) in self.mid.iter_mut().zip(a.iter()).zip(&self.next) {
                *m = 0.5 * (x + y);
            }
            let mid = std::mem::take(&mut self.mid);
            let mut rhs = std::mem::take(&mut self.rhs);
            self.cubic(&mid, &mut rhs);
            self.mid = mid;
            let mut change = 0.0;
            for ((n, x), r) in self.next.iter_mut().zip(a.iter()).zip(&rhs) {
                let y = x + scale * r;
                change += (y - *n).norm_sqr();
                *n = y;
            }
            self.rhs = rhs;
            if change.sqrt() <= 1e-15 * norm || norm == 0.0 {
                a.copy_from_slice(&self.next);
                return Ok(());
            }
            if it + 1 == MAX_ITER || !change.is_finite() {
                break;
            }
        }
        Err(KwrError::StepSize("implicit midpoint iteration did not converge; reduce dt".into()))
    }
}
