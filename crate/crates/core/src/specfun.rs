//! Special functions: gamma, sphere and ball constants, Bessel `J_ν`, and the
//! monochromatic correlation function `Λ_d`.
//!
//! `Λ_d(q)` is the spherical average of the plane wave `e^{i Z·θ}` over the
//! unit sphere `S^{d-1}` with `|Z| = q`; it equals
//! `Γ(d/2) |q/2|^{-ν} J_ν(q)` with `ν = d/2 - 1`, which reduces to `cos q`,
//! `J_0(q)` and `sin q / q` in dimensions one to three.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KwrError, Result};

/// Spatial dimension. Only `d ∈ {1, 2, 3}` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub const ONE: Dimension = Dimension(1);
    pub const TWO: Dimension = Dimension(2);
    pub const THREE: Dimension = Dimension(3);

    pub fn new(d: u32) -> Result<Self> {
        match d {
            1..=3 => Ok(Dimension(d)),
            _ => Err(KwrError::UnsupportedDimension(d)),
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Bessel order `ν = d/2 - 1` of the correlation function.
    pub fn nu(self) -> f64 {
        self.as_f64() / 2.0 - 1.0
    }
}

impl TryFrom<u32> for Dimension {
    type Error = KwrError;
    fn try_from(d: u32) -> Result<Self> {
        Dimension::new(d)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

/// A nonnegative, finite radial distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RadialArgument(f64);

impl RadialArgument {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q >= 0.0 {
            Ok(RadialArgument(q))
        } else {
            Err(KwrError::domain(format!("radial argument must be finite and >= 0, got {q}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (Lanczos approximation with reflection).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        // Exact values at integers and half-integers keep the sphere constants
        // free of approximation error.
        if x <= 30.0 && (2.0 * x).fract() == 0.0 {
            return gamma_half_integer(x);
        }
        let x = x - 1.0;
        let mut a = LANCZOS_COEFFS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

fn gamma_half_integer(x: f64) -> f64 {
    // x = n or n + 1/2 with x >= 1/2
    if x.fract() == 0.0 {
        (1..(x as u64)).fold(1.0, |acc, k| acc * k as f64)
    } else {
        let mut g = PI.sqrt();
        let mut y = 0.5;
        while y < x {
            g *= y;
            y += 1.0;
        }
        g
    }
}

/// Area of the unit sphere `S^{d-1}`: `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(d: Dimension) -> f64 {
    match d.get() {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("Dimension invariant"),
    }
}

/// Volume of the unit ball in `R^d`: `π^{d/2} / Γ(d/2 + 1)`.
pub fn ball_volume(d: Dimension) -> f64 {
    match d.get() {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!("Dimension invariant"),
    }
}

/// Same constants through the gamma function, for arbitrary real `d > 0`.
pub fn sphere_area_general(d: f64) -> f64 {
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

pub fn ball_volume_general(d: f64) -> f64 {
    PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0)
}

const SERIES_MAX_ARG: f64 = 8.0;
const ASYMPTOTIC_MIN_ARG: f64 = 25.0;

/// Bessel function of the first kind `J_ν(q)` for real `q ≥ 0`.
///
/// Orders `±1/2` use the elementary closed forms. Other orders `ν ≥ 0` use the
/// power series for `q ≤ 8`, the Hankel asymptotic expansion for `q ≥ 25`, and
/// in between the trapezoidal rule on Bessel's integral (integer orders only).
/// Non-integer orders in the gap, and negative orders other than `-1/2`, are
/// reported as [`KwrError::Accuracy`].
pub fn bessel_j(nu: f64, q: RadialArgument) -> Result<f64> {
    let x = q.get();
    if nu == 0.5 {
        return Ok(if x == 0.0 { 0.0 } else { (2.0 / (PI * x)).sqrt() * x.sin() });
    }
    if nu == -0.5 {
        if x == 0.0 {
            return Err(KwrError::Accuracy { order: nu, arg: x });
        }
        return Ok((2.0 / (PI * x)).sqrt() * x.cos());
    }
    if nu < 0.0 || !nu.is_finite() {
        return Err(KwrError::Accuracy { order: nu, arg: x });
    }
    if x <= SERIES_MAX_ARG {
        Ok(bessel_series(nu, x))
    } else if x >= ASYMPTOTIC_MIN_ARG {
        Ok(bessel_asymptotic(nu, x))
    } else if nu.fract() == 0.0 {
        Ok(bessel_integer_trapezoid(nu as i64, x))
    } else {
        Err(KwrError::Accuracy { order: nu, arg: x })
    }
}

/// `J_0` without argument checks; `x ≥ 0`.
pub(crate) fn bessel_j0(x: f64) -> f64 {
    if x <= SERIES_MAX_ARG {
        bessel_series(0.0, x)
    } else if x >= ASYMPTOTIC_MIN_ARG {
        bessel_asymptotic(0.0, x)
    } else {
        bessel_integer_trapezoid(0, x)
    }
}

fn bessel_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let h2 = half * half;
    let mut term = if nu == 0.0 { 1.0 } else { half.powf(nu) / gamma(nu + 1.0) };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -h2 / (k * (k + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k > half {
            break;
        }
        if k > 200.0 {
            break;
        }
    }
    sum
}

/// Hankel asymptotic coefficients `a_k(ν)` until they stop decreasing
/// relative to `x^k`.
fn hankel_series_terms(nu: f64, x: f64) -> Vec<f64> {
    let mu = 4.0 * nu * nu;
    let mut terms = vec![1.0];
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (8.0 * kf * x);
        let mag = a.abs();
        if mag == 0.0 {
            break;
        }
        if mag > prev {
            break;
        }
        terms.push(a);
        prev = mag;
        if mag < 1e-18 {
            break;
        }
    }
    terms
}

fn bessel_asymptotic(nu: f64, x: f64) -> f64 {
    let terms = hankel_series_terms(nu, x);
    let mut p = 0.0;
    let mut q = 0.0;
    for (k, t) in terms.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
    }
    let phase = (0.5 * nu + 0.25) * PI;
    let (sx, cx) = x.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let cos_chi = cx * cp + sx * sp;
    let sin_chi = sx * cp - cx * sp;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn bessel_integer_trapezoid(n: i64, x: f64) -> f64 {
    // J_n(x) = (1/2π) ∫_0^{2π} cos(nθ - x sin θ) dθ; the periodic trapezoid
    // rule converges geometrically once the point count exceeds x + n.
    let m = 2 * (x.ceil() as usize + n.unsigned_abs() as usize) + 64;
    let h = 2.0 * PI / m as f64;
    let nf = n as f64;
    let s: f64 = (0..m)
        .map(|j| {
            let th = j as f64 * h;
            (nf * th - x * th.sin()).cos()
        })
        .sum();
    s / m as f64
}

/// The correlation function `Λ_d(q)`; `Λ_d(0) = 1`.
pub fn lambda_d(d: Dimension, q: RadialArgument) -> f64 {
    lambda_raw(d, q.get())
}

const TAYLOR_CUTOFF: f64 = 1e-3;

/// `Λ_d` without argument validation; `q` must be nonnegative.
#[inline]
pub(crate) fn lambda_raw(d: Dimension, q: f64) -> f64 {
    if q < TAYLOR_CUTOFF {
        return lambda_taylor(d, q);
    }
    match d.get() {
        1 => q.cos(),
        2 => bessel_j0(q),
        3 => q.sin() / q,
        _ => unreachable!("Dimension invariant"),
    }
}

/// Even Taylor series of the sphere average through `q^8`:
/// `Σ_k (-1)^k Γ(d/2) (q/2)^{2k} / (k! Γ(k + d/2))`.
fn lambda_taylor(d: Dimension, q: f64) -> f64 {
    let a = d.as_f64() / 2.0;
    let h2 = 0.25 * q * q;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=4 {
        let kf = k as f64;
        term *= -h2 / (kf * (kf - 1.0 + a));
        sum += term;
    }
    sum
}

/// Large-argument amplitudes `h_±` with `Λ_d(z) = ½ (h_+(z) e^{iz} + h_-(z) e^{-iz})`,
/// valid for complex `z` in the right half plane with `|z| ≥ 25`.
pub(crate) fn lambda_hankel_amplitudes(d: Dimension, z: Complex64) -> (Complex64, Complex64) {
    let nu = d.nu();
    let mu = 4.0 * nu * nu;
    let inv = z.inv();
    let i = Complex64::new(0.0, 1.0);
    // Σ (±i)^k a_k z^{-k}, truncated at the smallest term
    let mut plus = Complex64::new(1.0, 0.0);
    let mut minus = Complex64::new(1.0, 0.0);
    let mut t_plus = Complex64::new(1.0, 0.0);
    let mut t_minus = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let factor = (mu - odd * odd) / (8.0 * kf);
        if factor == 0.0 {
            break;
        }
        t_plus = t_plus * inv * i * factor;
        t_minus = t_minus * inv * (-i) * factor;
        let mag = t_plus.norm();
        if mag > prev {
            break;
        }
        plus += t_plus;
        minus += t_minus;
        prev = mag;
        if mag < 1e-18 {
            break;
        }
    }
    let gamma_d2 = gamma(d.as_f64() / 2.0);
    let prefactor = (z * 0.5).powf(-nu) * (z * PI).inv().scale(2.0).sqrt() * gamma_d2;
    let phase = (0.5 * nu + 0.25) * PI;
    let e_plus = Complex64::from_polar(1.0, -phase);
    let e_minus = Complex64::from_polar(1.0, phase);
    (prefactor * e_plus * plus, prefactor * e_minus * minus)
}
