//! The radial collision operator
//! `C[ρ](ω) = ∬ K̃(ω, ω₁, ω₂) F(ρ, ρ₁, ρ₂, ρ₃) dω₁ dω₂`, `ω₃ = ω − ω₁ + ω₂`,
//! its kernel, the cubic `F` term, and the time-broadened variant.

mod broadened;
mod cache;
mod density;
mod grid;
mod table;

use std::f64::consts::PI;

pub use broadened::{
    broadened_collision_operator, broadened_collision_series, broadened_l1_norm, off_shell_collision, sinc2_kernel,
    BroadenedConfig, BroadenedTerm,
};
pub use cache::{cache_dir, load_or_build, read_table, write_table, CACHE_ENV};
pub use density::SpectralDensity;
pub use grid::{FrequencyGrid, GridLocation, Spacing};
pub use table::{KernelRow, KernelTable, TableConfig};

use crate::error::{KwrError, Result};
use crate::interaction::{closed_d2_floor, closed_d2_unchecked, interaction_integral, FrequencyQuad};
use crate::specfun::{sphere_area, Dimension};

/// `Ω = ω₀ − ω₁ + ω₂ − ω₃`.
pub fn resonance_modulus(quad: &FrequencyQuad) -> f64 {
    let w = quad.omega;
    w[0] - w[1] + w[2] - w[3]
}

/// `Σⱼ (−1)ʲ ∏_{ℓ≠j} ρ_ℓ = ρ₁ρ₂ρ₃ − ρ₀ρ₂ρ₃ + ρ₀ρ₁ρ₃ − ρ₀ρ₁ρ₂`.
#[inline]
pub fn f_term(rho: [f64; 4]) -> f64 {
    let [r0, r1, r2, r3] = rho;
    r1 * r2 * r3 - r0 * (r2 * r3 - r1 * r3 + r1 * r2)
}

/// `(π²/2) (s(d)/(2π)^d)³`.
pub fn kstar_prefactor(d: Dimension) -> f64 {
    let c = sphere_area(d) / (2.0 * PI).powi(d.get() as i32);
    0.5 * PI * PI * c * c * c
}

/// `K_* = (π²/2)(s(d)/(2π)^d)³ (ω₁ω₂ω₃)^{d/2−1} I(ω₀,ω₁,ω₂,ω₃)` through the
/// certified quadrature of the interaction integral. `Ω` need not vanish.
pub fn kernel_kstar(d: Dimension, quad: &FrequencyQuad, tol: f64) -> Result<f64> {
    let i = interaction_integral(d, quad, tol)?.value;
    let w = quad.omega;
    let weight = (w[1] * w[2] * w[3]).powf(d.as_f64() / 2.0 - 1.0);
    Ok(kstar_prefactor(d) * weight * i)
}

/// `K_*` from the closed forms, as a function of the wavenumbers `kⱼ = √ωⱼ`.
/// Unchecked: `d ∈ {2, 3}` and `k > 0` are the caller's responsibility.
/// In `d = 2` the logarithmic singularities are capped (see `closed_d2_floor`).
#[inline]
pub(crate) fn kernel_closed(d: Dimension, prefactor: f64, k: &[f64; 4]) -> f64 {
    if d.get() == 3 {
        // (k₁k₂k₃) · I₃ with the ∏k cancelled
        let mut acc = 0.0;
        for mask in 0..8u32 {
            let s1 = if mask & 1 == 0 { 1.0 } else { -1.0 };
            let s2 = if mask & 2 == 0 { 1.0 } else { -1.0 };
            let s3 = if mask & 4 == 0 { 1.0 } else { -1.0 };
            acc += s1 * s2 * s3 * (k[0] + s1 * k[1] + s2 * k[2] + s3 * k[3]).abs();
        }
        -prefactor * PI * PI / 4.0 * acc / k[0]
    } else {
        prefactor * closed_d2_floor(k, 1e-32)
    }
}

/// `K_*` at an arbitrary quad from the closed forms (`d ∈ {2, 3}`).
pub fn kernel_kstar_closed(d: Dimension, quad: &FrequencyQuad) -> Result<f64> {
    if d.get() == 1 {
        return Err(KwrError::domain("the collision kernel is not defined for d=1"));
    }
    if quad.omega.iter().any(|w| *w <= 0.0) {
        return Err(KwrError::domain("closed-form kernel requires strictly positive frequencies"));
    }
    let k = quad.wavenumbers();
    let v = if d.get() == 2 {
        kstar_prefactor(d) * closed_d2_unchecked(&k)
    } else {
        kernel_closed(d, kstar_prefactor(d), &k)
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KwrError::Convergence {
            reason: "kernel diverges at this degenerate quad".into(),
            partial: v,
            last_increment: f64::INFINITY,
        })
    }
}

/// Truncation frequency for a spectrum: 1.25 times the largest node where
/// `ρ ≥ 1e−14 max ρ`, capped at the grid maximum.
pub fn support_cutoff(rho: &SpectralDensity) -> f64 {
    let grid = rho.grid();
    let max = rho.values().iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return grid.omega_max();
    }
    let last = rho
        .values()
        .iter()
        .rposition(|v| *v >= 1e-14 * max)
        .map(|i| grid.nodes()[i])
        .unwrap_or(grid.omega_max());
    (1.25 * last).min(grid.omega_max())
}

/// `C[ρ](ω)` for `ω` inside the grid range. Grid nodes use the precomputed
/// rows of `table`; other frequencies get a row built on the fly with the
/// table's layout. Frequencies above the table's cutoff return 0.
pub fn collision_operator(d: Dimension, rho: &SpectralDensity, omega: f64, table: &KernelTable) -> Result<f64> {
    table.check_compatible(d, rho)?;
    let grid = rho.grid();
    if !(omega >= grid.omega_min() && omega <= grid.omega_max()) {
        return Err(KwrError::domain(format!(
            "omega={omega} outside the grid range [{}, {}]",
            grid.omega_min(),
            grid.omega_max()
        )));
    }
    if omega > table.omega_cut() {
        return Ok(0.0);
    }
    if let Ok(i) = grid.nodes().binary_search_by(|x| x.total_cmp(&omega)) {
        if let Some(row) = table.row(i) {
            return Ok(row.apply(rho));
        }
    }
    Ok(table.build_row(omega)?.apply(rho))
}

/// `C[ρ]` at every grid node (0 above the cutoff). Rows are evaluated in
/// parallel; each row sums in a fixed order.
pub fn collision_rhs(rho: &SpectralDensity, table: &KernelTable) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    table.check_compatible(table.dimension(), rho)?;
    Ok((0..rho.grid().len())
        .into_par_iter()
        .map(|i| table.row(i).map_or(0.0, |row| row.apply(rho)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonance_modulus_examples() {
        let q = |w: [f64; 4]| FrequencyQuad::from_array(w).unwrap();
        assert_eq!(resonance_modulus(&q([1.0; 4])), 0.0);
        assert_eq!(resonance_modulus(&q([5.0, 2.0, 1.0, 4.0])), 0.0);
        assert_eq!(resonance_modulus(&q([3.0, 1.0, 1.0, 1.0])), 2.0);
    }

    #[test]
    fn f_term_examples() {
        assert_eq!(f_term([2.5; 4]), 0.0);
        assert_eq!(f_term([1.0, 2.0, 3.0, 4.0]), 14.0);
        let mu = 0.7;
        let rj = [5.0, 2.0, 1.0, 4.0].map(|w: f64| 1.0 / (w + mu));
        assert!(f_term(rj).abs() < 1e-15);
    }

    #[test]
    fn kernel_unit_quad_d3() {
        let q = FrequencyQuad::from_array([1.0; 4]).unwrap();
        let expected = 1.0 / (16.0 * PI * PI);
        let v = kernel_kstar(Dimension::THREE, &q, 1e-10).unwrap();
        assert!((v - expected).abs() < 1e-6 * expected);
        let c = kernel_kstar_closed(Dimension::THREE, &q).unwrap();
        assert!((c - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn kernel_swap_symmetry() {
        for d in [Dimension::TWO, Dimension::THREE] {
            let a = FrequencyQuad::from_array([1.7, 0.4, 2.2, 3.5]).unwrap();
            let b = a.permuted([0, 3, 2, 1]);
            let ka = kernel_kstar_closed(d, &a).unwrap();
            let kb = kernel_kstar_closed(d, &b).unwrap();
            assert!((ka - kb).abs() <= 1e-12 * ka.abs());
        }
    }

    #[test]
    fn closed_kernel_matches_quadrature_kernel_d2() {
        let q = FrequencyQuad::from_array([1.7, 0.4, 2.2, 3.5]).unwrap();
        let a = kernel_kstar(Dimension::TWO, &q, 1e-10).unwrap();
        let b = kernel_kstar_closed(Dimension::TWO, &q).unwrap();
        assert!((a - b).abs() < 1e-7 * b.abs());
    }
}
